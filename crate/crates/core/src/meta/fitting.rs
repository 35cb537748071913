//! Maximum-likelihood driver shared by the likelihood-based fitters.
//!
//! The search runs in (u, v) with θ = tanh(u) and τ = |v|, so every simplex
//! vertex maps into the parameter space. Standard errors come from a
//! central-difference Hessian on the natural (θ, τ) scale.

use crate::error::{GrrrError, Result};
use crate::numeric::optimize::{NelderMead, OptimizerResult};
use crate::numeric::rng::RngStream;

use super::{FitDiagnostics, LogLikelihood};

const THETA_LIMIT: f64 = 1.0 - 1e-9;
const BOUNDARY_TAU: f64 = 1e-3;
const BOUNDARY_SLACK: f64 = 1e-8;
const GRADIENT_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Random starts in addition to the default one.
    pub restarts: usize,
    pub seed: u64,
    /// Simplex diameter at which the search stops.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 3,
            seed: 0x005e_ed0f_9111,
            tol: 1e-10,
            max_iterations: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodFit {
    pub theta: f64,
    pub tau: f64,
    pub se_theta: f64,
    pub se_tau: f64,
    pub loglik: f64,
    pub diagnostics: FitDiagnostics,
}

fn clamp_theta(theta: f64) -> f64 {
    theta.clamp(-THETA_LIMIT, THETA_LIMIT)
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Exactly odd, unlike `f64::atanh`.
fn atanh(x: f64) -> f64 {
    sign(x) * x.abs().atanh()
}

/// Moves an infeasible start inward until the likelihood is finite.
fn feasible_start<L: LogLikelihood + ?Sized>(
    lik: &L,
    theta0: f64,
    tau0: f64,
) -> Option<(f64, f64)> {
    let mut theta = clamp_theta(theta0);
    for _ in 0..60 {
        let mut tau = tau0;
        for _ in 0..60 {
            if lik.loglik(theta, tau).is_finite() {
                return Some((theta, tau));
            }
            tau *= 0.5;
        }
        if lik.loglik(theta, 0.0).is_finite() {
            return Some((theta, 0.0));
        }
        theta *= 0.5;
    }
    None
}

/// Maximizes the likelihood over θ ∈ (−1, 1), τ ≥ 0.
pub fn fit_likelihood<L: LogLikelihood + ?Sized>(
    lik: &L,
    theta0: f64,
    tau0: f64,
    options: &FitOptions,
) -> Result<LikelihoodFit> {
    let (theta0, tau0) = feasible_start(lik, theta0, tau0.max(0.0)).ok_or_else(|| {
        GrrrError::InvalidArgument("no feasible starting point for the likelihood".into())
    })?;
    let objective = |x: &[f64]| -> f64 {
        let l = lik.loglik(clamp_theta(x[0].tanh()), x[1].abs());
        if l.is_finite() {
            -l
        } else {
            f64::INFINITY
        }
    };

    let u0 = atanh(clamp_theta(theta0));
    let s = sign(u0);
    let v0 = if tau0 > 0.0 { tau0 } else { 0.05 };
    let v_step = (0.25 * v0).max(0.02);
    let search = |u: f64, v: f64| -> OptimizerResult {
        NelderMead::new(options.tol)
            .with_max_iterations(options.max_iterations)
            .with_initial_step(vec![-sign(u) * 0.1, v_step])
            .minimize(objective, &[u, v])
    };

    let mut runs = vec![search(u0, v0)];
    let mut rng = RngStream::new(options.seed, 0);
    for _ in 0..options.restarts {
        let z1 = rng.next_normal();
        let z2 = rng.next_normal();
        let theta = clamp_theta((u0 + s * 0.5 * z1).tanh());
        if let Some((theta, tau)) = feasible_start(lik, theta, v0 * (0.5 * z2).exp()) {
            runs.push(search(
                atanh(clamp_theta(theta)),
                if tau > 0.0 { tau } else { 0.05 },
            ));
        }
    }
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.value < runs[best].value {
            best = i;
        }
    }
    let best_run = &runs[best];
    if !best_run.converged || !best_run.value.is_finite() {
        return Err(GrrrError::NonConvergence {
            iterations: best_run.iterations,
            diameter: best_run.diameter,
        });
    }
    let mut diagnostics = FitDiagnostics {
        converged: true,
        iterations: runs.iter().map(|r| r.iterations).sum(),
        gradient_norm: None,
        restart_thetas: runs
            .iter()
            .map(|r| clamp_theta(r.argmin[0].tanh()))
            .collect(),
        restart_logliks: runs.iter().map(|r| -r.value).collect(),
        tau_on_boundary: false,
    };

    let mut theta = clamp_theta(best_run.argmin[0].tanh());
    let mut tau = best_run.argmin[1].abs();
    let mut loglik = -best_run.value;

    if tau < BOUNDARY_TAU {
        let u = atanh(theta);
        let at_zero = NelderMead::new(options.tol)
            .with_max_iterations(options.max_iterations)
            .with_initial_step(vec![-sign(u) * 0.05])
            .minimize(|x: &[f64]| objective(&[x[0], 0.0]), &[u]);
        if at_zero.converged && -at_zero.value >= loglik - BOUNDARY_SLACK {
            theta = clamp_theta(at_zero.argmin[0].tanh());
            tau = 0.0;
            loglik = -at_zero.value;
            diagnostics.tau_on_boundary = true;
        }
    }

    let l = |t: f64, s: f64| lik.loglik(t, s);
    let h_theta = (1e-4 * theta.abs()).max(1e-4);
    let l0 = l(theta, tau);
    let h_tt = (l(theta + h_theta, tau) - 2.0 * l0 + l(theta - h_theta, tau)) / (h_theta * h_theta);
    let g_theta =
        (l(theta + GRADIENT_STEP, tau) - l(theta - GRADIENT_STEP, tau)) / (2.0 * GRADIENT_STEP);

    let (se_theta, se_tau) = if diagnostics.tau_on_boundary {
        diagnostics.gradient_norm = Some(g_theta.abs());
        if !(-h_tt > 0.0) {
            return Err(GrrrError::SingularInformation);
        }
        ((-h_tt).sqrt().recip(), 0.0)
    } else {
        let mut h_tau = (1e-4 * tau).max(1e-4);
        if tau - h_tau < 0.0 {
            h_tau = 0.5 * tau;
        }
        let h_ss = (l(theta, tau + h_tau) - 2.0 * l0 + l(theta, tau - h_tau)) / (h_tau * h_tau);
        let h_ts = (l(theta + h_theta, tau + h_tau)
            - l(theta + h_theta, tau - h_tau)
            - l(theta - h_theta, tau + h_tau)
            + l(theta - h_theta, tau - h_tau))
            / (4.0 * h_theta * h_tau);
        let g_step = GRADIENT_STEP.min(0.5 * tau);
        let g_tau = (l(theta, tau + g_step) - l(theta, tau - g_step)) / (2.0 * g_step);
        diagnostics.gradient_norm = Some(g_theta.hypot(g_tau));
        let (i11, i22, i12) = (-h_tt, -h_ss, -h_ts);
        let det = i11 * i22 - i12 * i12;
        if !(i11 > 0.0 && det > 0.0) || !det.is_finite() {
            return Err(GrrrError::SingularInformation);
        }
        ((i22 / det).sqrt(), (i11 / det).sqrt())
    };

    Ok(LikelihoodFit {
        theta,
        tau,
        se_theta,
        se_tau,
        loglik,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic;

    impl LogLikelihood for Quadratic {
        fn loglik(&self, theta: f64, tau: f64) -> f64 {
            -0.5 * ((theta + 0.3) / 0.1).powi(2) - 0.5 * ((tau - 0.2) / 0.05).powi(2)
        }
    }

    struct Boundary;

    impl LogLikelihood for Boundary {
        fn loglik(&self, theta: f64, tau: f64) -> f64 {
            -0.5 * ((theta - 0.4) / 0.2).powi(2) - 3.0 * tau * tau
        }
    }

    #[test]
    fn gaussian_surface() {
        let f = fit_likelihood(&Quadratic, 0.0, 0.5, &FitOptions::default()).unwrap();
        assert!((f.theta + 0.3).abs() < 1e-7);
        assert!((f.tau - 0.2).abs() < 1e-7);
        assert!((f.se_theta - 0.1).abs() < 1e-6);
        assert!((f.se_tau - 0.05).abs() < 1e-6);
        assert!(f.diagnostics.gradient_norm.unwrap() < 1e-4);
        assert_eq!(f.diagnostics.restart_thetas.len(), 4);
    }

    #[test]
    fn boundary_tau() {
        let f = fit_likelihood(&Boundary, 0.0, 0.3, &FitOptions::default()).unwrap();
        assert!(f.diagnostics.tau_on_boundary);
        assert_eq!(f.tau, 0.0);
        assert_eq!(f.se_tau, 0.0);
        assert!((f.theta - 0.4).abs() < 1e-7);
        assert!((f.se_theta - 0.2).abs() < 1e-5);
    }

    #[test]
    fn flat_surface_is_singular() {
        struct Flat;
        impl LogLikelihood for Flat {
            fn loglik(&self, _: f64, tau: f64) -> f64 {
                -tau * tau
            }
        }
        let r = fit_likelihood(&Flat, 0.1, 0.1, &FitOptions::default());
        assert!(matches!(r, Err(GrrrError::SingularInformation)));
    }
}
