//! Derivative-free Nelder–Mead simplex minimizer for small problems.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerResult {
    pub argmin: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Largest vertex distance from the best vertex at termination.
    pub diameter: f64,
}

#[derive(Debug, Clone)]
pub struct NelderMead {
    pub tol: f64,
    pub max_iterations: usize,
    /// Per-coordinate initial simplex offsets; the sign sets the direction.
    pub initial_step: Option<Vec<f64>>,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iterations: 20_000,
            initial_step: None,
        }
    }
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

impl NelderMead {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    pub fn with_initial_step(mut self, step: Vec<f64>) -> Self {
        self.initial_step = Some(step);
        self
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, start: &[f64]) -> OptimizerResult {
        let n = start.len();
        let steps: Vec<f64> = match &self.initial_step {
            Some(s) => s.clone(),
            None => start
                .iter()
                .map(|&x| if x != 0.0 { 0.05 * x } else { 0.00025 })
                .collect(),
        };
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        simplex.push(start.to_vec());
        for i in 0..n {
            let mut v = start.to_vec();
            v[i] += steps[i];
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| sanitize(f(v))).collect();
        let mut iterations = 0;

        loop {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let diameter = simplex[1..]
                .iter()
                .map(|v| distance(v, &simplex[0]))
                .fold(0.0, f64::max);
            if diameter < self.tol || iterations >= self.max_iterations {
                return OptimizerResult {
                    argmin: simplex[0].clone(),
                    value: values[0],
                    converged: diameter < self.tol,
                    iterations,
                    diameter,
                };
            }
            iterations += 1;

            let mut centroid = vec![0.0; n];
            for v in &simplex[..n] {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / n as f64;
                }
            }
            let worst = simplex[n].clone();
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&worst)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };

            let reflected = along(REFLECT);
            let f_r = sanitize(f(&reflected));
            if f_r < values[0] {
                let expanded = along(EXPAND);
                let f_e = sanitize(f(&expanded));
                if f_e < f_r {
                    simplex[n] = expanded;
                    values[n] = f_e;
                } else {
                    simplex[n] = reflected;
                    values[n] = f_r;
                }
                continue;
            }
            if f_r < values[n - 1] {
                simplex[n] = reflected;
                values[n] = f_r;
                continue;
            }
            let (candidate, f_c) = if f_r < values[n] {
                let c = along(CONTRACT);
                let fc = sanitize(f(&c));
                (c, fc)
            } else {
                let c = along(-CONTRACT);
                let fc = sanitize(f(&c));
                (c, fc)
            };
            if f_c < values[n].min(f_r) {
                simplex[n] = candidate;
                values[n] = f_c;
                continue;
            }
            let best = simplex[0].clone();
            for i in 1..=n {
                for (x, b) in simplex[i].iter_mut().zip(&best) {
                    *x = b + SHRINK * (*x - b);
                }
                values[i] = sanitize(f(&simplex[i]));
            }
        }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Minimizes `f` from `start` until the simplex diameter drops below `tol`.
pub fn minimize<F: FnMut(&[f64]) -> f64>(f: F, start: &[f64], tol: f64) -> OptimizerResult {
    NelderMead::new(tol).minimize(f, start)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let r = minimize(|x| (x[0] - 3.0).powi(2), &[0.0], 1e-10);
        assert!(r.converged);
        assert!((r.argmin[0] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let r = NelderMead::new(1e-10)
            .with_initial_step(vec![0.1, 0.1])
            .minimize(f, &[-1.2, 1.0]);
        assert!(r.converged);
        assert!(
            (r.argmin[0] - 1.0).abs() < 1e-4 && (r.argmin[1] - 1.0).abs() < 1e-4,
            "{:?}",
            r.argmin
        );
    }

    #[test]
    fn kinked_absolute_value() {
        let r = NelderMead::new(1e-10)
            .with_initial_step(vec![0.3])
            .minimize(|x| x[0].abs(), &[1.7]);
        assert!(r.converged);
        assert!(r.argmin[0].abs() < 1e-6);
    }

    #[test]
    fn infeasible_region_is_avoided() {
        let f = |x: &[f64]| {
            if x[0] < 0.5 {
                f64::INFINITY
            } else {
                (x[0] - 0.5).powi(2) + x[1] * x[1]
            }
        };
        let r = NelderMead::new(1e-9)
            .with_initial_step(vec![0.2, 0.2])
            .minimize(f, &[1.0, 1.0]);
        assert!(r.value.is_finite());
        assert!(r.argmin[0] >= 0.5);
    }

    #[test]
    fn deterministic() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + (x[1] + 2.0).powi(4) + (x[0] * x[1]).sin();
        let a = minimize(f, &[0.3, 0.4], 1e-9);
        let b = minimize(f, &[0.3, 0.4], 1e-9);
        assert_eq!(a, b);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let r = NelderMead::new(1e-12)
            .with_max_iterations(5)
            .minimize(f, &[-1.2, 1.0]);
        assert!(!r.converged);
        assert_eq!(r.iterations, 5);
    }
}
