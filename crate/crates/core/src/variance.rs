//! Within-study variance of θ̂ under plug-in binomial sampling.
//!
//! Three routes: exact enumeration over the joint support, a seeded
//! parametric bootstrap, and a closed form that treats each side of the
//! split-lognormal approximation as a truncated lognormal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, GrrrError, Result};
use crate::measure::{estimate_theta, theta_from_counts, StudyTable};
use crate::numeric::normal::std_normal_cdf;
use crate::numeric::rng::{rng_binomial, RngStream};
use crate::split_lognormal::SplitLognormalApprox;

pub const DEFAULT_CELL_CAP: u64 = 100_000_000;
pub const DEFAULT_BOOTSTRAP_REPLICATES: u64 = 100_000;
pub const MIN_BOOTSTRAP_REPLICATES: u64 = 1000;
pub const DEFAULT_ZERO_CORRECTION: f64 = 0.5;

/// Binomial tail cut-off relative to the mode.
const PMF_FLOOR: f64 = 1e-300;
const BOOTSTRAP_BLOCK: u64 = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum VarianceMethod {
    Exact,
    Bootstrap { replicates: u64, seed: u64 },
    Analytic,
}

/// One study's point estimate with its sampling variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrrrEstimate {
    pub study_id: String,
    pub theta_hat: f64,
    pub sigma2: f64,
    /// Delta-method log-scale variances, absent when a zero cell could not
    /// be corrected.
    pub sigma1_sq: Option<f64>,
    pub sigma2_sq: Option<f64>,
    pub degenerate: bool,
}

impl GrrrEstimate {
    /// Usable as a direct outcome: informative and with positive variance.
    pub fn is_informative(&self) -> bool {
        !self.degenerate && self.sigma2 > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions {
    pub method: VarianceMethod,
    /// Added to all four cells when some proportion is 0 or 1, for the
    /// delta-method moments. `None` leaves those moments absent.
    pub zero_correction: Option<f64>,
    /// When set, θ̂ of a table with a 0 or 1 proportion is taken from the
    /// corrected proportions, keeping it strictly inside (−1, 1).
    pub correct_boundary_theta: bool,
    pub cell_cap: u64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            method: VarianceMethod::Exact,
            zero_correction: Some(DEFAULT_ZERO_CORRECTION),
            correct_boundary_theta: false,
            cell_cap: DEFAULT_CELL_CAP,
        }
    }
}

pub fn estimate_study(table: &StudyTable, options: &EstimateOptions) -> Result<GrrrEstimate> {
    table.validate()?;
    let est = estimate_theta(table);
    let sigma2 = match options.method {
        VarianceMethod::Exact => variance_exact_capped(table, options.cell_cap)?,
        VarianceMethod::Bootstrap { replicates, seed } => {
            variance_bootstrap(table, replicates, seed)?
        }
        VarianceMethod::Analytic => {
            if est.degenerate {
                0.0
            } else {
                variance_analytic(table)?
            }
        }
    };
    let approx = match delta_method_params(table, options.zero_correction) {
        Ok(a) => Some(a),
        Err(GrrrError::ZeroCell { .. }) => None,
        Err(e) => return Err(e),
    };
    let mut theta_hat = est.theta.value();
    if options.correct_boundary_theta && !est.degenerate && table.has_boundary_proportion() {
        let c = options.zero_correction.ok_or_else(|| GrrrError::ZeroCell {
            study_id: table.study_id.clone(),
        })?;
        theta_hat = table.corrected_theta(c);
    }
    Ok(GrrrEstimate {
        study_id: table.study_id.clone(),
        theta_hat,
        sigma2: if est.degenerate { 0.0 } else { sigma2 },
        sigma1_sq: approx.map(|a| a.sigma1_sq),
        sigma2_sq: approx.map(|a| a.sigma2_sq),
        degenerate: est.degenerate,
    })
}

/// Binomial(n, p) pmf over its numerically non-negligible support, as
/// (first index, probabilities).
fn binomial_support(n: u64, p: f64) -> (u64, Vec<f64>) {
    if p <= 0.0 {
        return (0, vec![1.0]);
    }
    if p >= 1.0 {
        return (n, vec![1.0]);
    }
    let ratio = p / (1.0 - p);
    let mode = ((((n + 1) as f64) * p).floor() as u64).min(n);
    let mut below = Vec::new();
    let mut w = 1.0;
    let mut i = mode;
    while i > 0 {
        w *= i as f64 / ((n - i + 1) as f64 * ratio);
        if w < PMF_FLOOR {
            break;
        }
        below.push(w);
        i -= 1;
    }
    let start = mode - below.len() as u64;
    let mut pmf: Vec<f64> = below.into_iter().rev().collect();
    pmf.push(1.0);
    let mut w = 1.0;
    let mut i = mode;
    while i < n {
        w *= ratio * (n - i) as f64 / (i + 1) as f64;
        if w < PMF_FLOOR {
            break;
        }
        pmf.push(w);
        i += 1;
    }
    let total: f64 = pmf.iter().sum();
    pmf.iter_mut().for_each(|x| *x /= total);
    (start, pmf)
}

pub fn variance_exact(table: &StudyTable) -> Result<f64> {
    variance_exact_capped(table, DEFAULT_CELL_CAP)
}

/// Exact enumeration; the cap bounds the number of (i, j) cells visited
/// after the binomial tails are truncated.
pub fn variance_exact_capped(table: &StudyTable, cell_cap: u64) -> Result<f64> {
    table.validate()?;
    if table.is_double_degenerate() {
        return Ok(0.0);
    }
    let (n1, n2) = (table.n_control, table.n_treatment);
    let (s1, pmf1) = binomial_support(n1, table.p_hat());
    let (s2, pmf2) = binomial_support(n2, table.q_hat());
    let cells = pmf1.len() as u64 * pmf2.len() as u64;
    if cells > cell_cap {
        return Err(GrrrError::ResourceLimit {
            study_id: table.study_id.clone(),
            cells,
            cap: cell_cap,
        });
    }
    let row = |a: usize, f: &(dyn Fn(f64) -> f64 + Sync)| -> f64 {
        let i = s1 + a as u64;
        let inner: f64 = pmf2
            .iter()
            .enumerate()
            .map(|(b, &q)| q * f(theta_from_counts(i, n1, s2 + b as u64, n2)))
            .sum();
        pmf1[a] * inner
    };
    let sum_rows = |f: &(dyn Fn(f64) -> f64 + Sync)| -> f64 {
        let rows: Vec<f64> = (0..pmf1.len()).into_par_iter().map(|a| row(a, f)).collect();
        rows.iter().sum()
    };
    let mean = sum_rows(&|t| t);
    let var = sum_rows(&|t| (t - mean) * (t - mean));
    Ok(var.max(0.0))
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * other.n as f64 / n as f64,
            m2: self.m2 + other.m2 + d * d * (self.n as f64 * other.n as f64 / n as f64),
        }
    }
}

/// Sample variance (n − 1 divisor) of θ̂ over parametric bootstrap tables.
/// Replicates are drawn in fixed-size blocks, block b from stream b of the
/// seed, so the result does not depend on the number of threads.
pub fn variance_bootstrap(table: &StudyTable, replicates: u64, seed: u64) -> Result<f64> {
    table.validate()?;
    if replicates < MIN_BOOTSTRAP_REPLICATES {
        return Err(GrrrError::InvalidArgument(format!(
            "bootstrap needs at least {MIN_BOOTSTRAP_REPLICATES} replicates, got {replicates}"
        )));
    }
    let (n1, n2) = (table.n_control, table.n_treatment);
    let (p, q) = (table.p_hat(), table.q_hat());
    let blocks = replicates.div_ceil(BOOTSTRAP_BLOCK);
    let stats: Vec<Moments> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let count = BOOTSTRAP_BLOCK.min(replicates - b * BOOTSTRAP_BLOCK);
            let mut rng = RngStream::new(seed, b);
            let mut m = Moments::default();
            for _ in 0..count {
                let i = rng_binomial(n1, p, &mut rng);
                let j = rng_binomial(n2, q, &mut rng);
                m.push(theta_from_counts(i, n1, j, n2));
            }
            m
        })
        .collect();
    let total = stats.into_iter().fold(Moments::default(), Moments::merge);
    Ok((total.m2 / (total.n - 1) as f64).max(0.0))
}

/// Closed-form variance from the two lognormal sides, using the raw
/// proportions. Both proportions must lie strictly inside (0, 1).
pub fn variance_analytic(table: &StudyTable) -> Result<f64> {
    let a = delta_method_params(table, None)?;
    let (s1, s2) = (a.sigma1(), a.sigma2());
    let moment = |n: f64, mu: f64, s: f64| -> f64 {
        libm::exp(n * mu + 0.5 * n * n * s * s) * std_normal_cdf(-mu / s - n * s)
    };
    let an = |n: f64| moment(n, a.mu1, s1);
    let bn = |n: f64| moment(n, a.mu2, s2);
    let (a0, a1, a2) = (an(0.0), an(1.0), an(2.0));
    let (b0, b1, b2) = (bn(0.0), bn(1.0), bn(2.0));
    let mean = a1 - a0 + b0 - b1;
    let second = a2 - 2.0 * a1 + a0 + b2 - 2.0 * b1 + b0;
    let v = second - mean * mean;
    check_finite("analytic variance", v)?;
    Ok(v.max(0.0))
}

/// Delta-method moments of the two log ratios. When some proportion is 0
/// or 1, `zero_correction` is added to all four cells; without one that
/// case is an error.
pub fn delta_method_params(
    table: &StudyTable,
    zero_correction: Option<f64>,
) -> Result<SplitLognormalApprox> {
    table.validate()?;
    let c = if table.has_boundary_proportion() {
        match zero_correction {
            Some(c) if c > 0.0 && c.is_finite() => c,
            _ => {
                return Err(GrrrError::ZeroCell {
                    study_id: table.study_id.clone(),
                })
            }
        }
    } else {
        0.0
    };
    // Complements come from counts so that flipping labels swaps the two
    // sides exactly.
    let n1 = table.n_control as f64 + 2.0 * c;
    let n2 = table.n_treatment as f64 + 2.0 * c;
    let p = (table.events_control as f64 + c) / n1;
    let pc = ((table.n_control - table.events_control) as f64 + c) / n1;
    let q = (table.events_treatment as f64 + c) / n2;
    let qc = ((table.n_treatment - table.events_treatment) as f64 + c) / n2;
    let (mu1, mu2) = if p == q {
        (0.0, 0.0)
    } else {
        (libm::log(q / p), libm::log(qc / pc))
    };
    SplitLognormalApprox::new(
        mu1,
        qc / (q * n2) + pc / (p * n1),
        mu2,
        q / (qc * n2) + p / (pc * n1),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::special::ln_gamma;
    use proptest::prelude::*;

    fn table(e1: u64, n1: u64, e2: u64, n2: u64) -> StudyTable {
        StudyTable::new("t", e1, n1, e2, n2).unwrap()
    }

    /// Direct double sum with log-factorial pmfs.
    fn brute_force(t: &StudyTable) -> f64 {
        let pmf = |n: u64, k: u64, p: f64| -> f64 {
            if p == 0.0 {
                return if k == 0 { 1.0 } else { 0.0 };
            }
            if p == 1.0 {
                return if k == n { 1.0 } else { 0.0 };
            }
            let (nf, kf) = (n as f64, k as f64);
            (ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0)
                + kf * p.ln()
                + (nf - kf) * (1.0 - p).ln())
            .exp()
        };
        let (p, q) = (t.p_hat(), t.q_hat());
        let (mut m1, mut m2) = (0.0, 0.0);
        for i in 0..=t.n_control {
            for j in 0..=t.n_treatment {
                let w = pmf(t.n_control, i, p) * pmf(t.n_treatment, j, q);
                let pi = i as f64 / t.n_control as f64;
                let qj = j as f64 / t.n_treatment as f64;
                let th = if qj < pi {
                    qj / pi - 1.0
                } else if qj > pi {
                    1.0 - (1.0 - qj) / (1.0 - pi)
                } else {
                    0.0
                };
                m1 += w * th;
                m2 += w * th * th;
            }
        }
        m2 - m1 * m1
    }

    #[test]
    fn exact_matches_brute_force_examples() {
        for t in [
            table(5, 10, 2, 10),
            table(50, 100, 25, 100),
            table(0, 12, 3, 9),
            table(7, 7, 2, 30),
        ] {
            let v = variance_exact(&t).unwrap();
            assert!((v - brute_force(&t)).abs() < 1e-10, "{t:?}");
        }
    }

    #[test]
    fn frozen_exact_values() {
        // Independent double sum in 50-digit arithmetic.
        let v = variance_exact(&table(5, 10, 2, 10)).unwrap();
        assert!((v - 0.096_116_623_368_584_56).abs() < 1e-12, "{v}");
        let v = variance_exact(&table(50, 100, 25, 100)).unwrap();
        assert!((v - 0.010_451_932_509_070_188).abs() < 1e-12, "{v}");
    }

    #[test]
    fn degenerate_tables_have_zero_variance() {
        assert_eq!(variance_exact(&table(0, 10, 0, 10)).unwrap(), 0.0);
        assert_eq!(variance_exact(&table(10, 10, 4, 4)).unwrap(), 0.0);
        assert_eq!(
            variance_bootstrap(&table(0, 10, 0, 10), 1000, 1).unwrap(),
            0.0
        );
    }

    #[test]
    fn symmetric_table() {
        let t = table(5, 10, 5, 10);
        let v = variance_exact(&t).unwrap();
        assert!(v > 0.0);
        assert!((v - variance_exact(&t.label_flipped()).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn cell_cap_is_enforced() {
        let t = table(500, 1000, 300, 1000);
        assert!(matches!(
            variance_exact_capped(&t, 1000),
            Err(GrrrError::ResourceLimit { .. })
        ));
    }

    #[test]
    fn large_arms_fit_under_the_cap() {
        let t = table(499, 88391, 505, 88391);
        let v = variance_exact(&t).unwrap();
        assert!(v > 0.0 && v < 0.01);
    }

    #[test]
    fn bootstrap_is_deterministic_and_close() {
        let t = table(5, 10, 2, 10);
        let a = variance_bootstrap(&t, 20_000, 9).unwrap();
        let b = variance_bootstrap(&t, 20_000, 9).unwrap();
        assert_eq!(a, b);
        let exact = variance_exact(&t).unwrap();
        assert!((a - exact).abs() < 0.1 * exact);
        assert!(variance_bootstrap(&t, 999, 9).is_err());
    }

    #[test]
    fn bootstrap_ignores_thread_count() {
        let t = table(30, 80, 21, 75);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one.install(|| variance_bootstrap(&t, 100_000, 3).unwrap());
        let b = four.install(|| variance_bootstrap(&t, 100_000, 3).unwrap());
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn analytic_examples() {
        for t in [table(50, 100, 50, 100), table(30, 150, 90, 150)] {
            let exact = variance_exact(&t).unwrap();
            let approx = variance_analytic(&t).unwrap();
            assert!(
                ((approx - exact) / exact).abs() < 0.05,
                "{t:?}: {approx} vs {exact}"
            );
        }
        let v = variance_analytic(&table(1, 10, 9, 10)).unwrap();
        assert!(v.is_finite() && v >= 0.0);
        assert!(variance_analytic(&table(0, 10, 9, 10)).is_err());
    }

    #[test]
    fn delta_examples() {
        let a = delta_method_params(&table(50, 100, 25, 100), None).unwrap();
        assert!((a.sigma1_sq - 0.04).abs() < 1e-15);
        assert!((a.mu1 - 0.5f64.ln()).abs() < 1e-15);
        assert!((a.sigma2_sq - (0.25 / 75.0 + 0.5 / 50.0)).abs() < 1e-15);
        let a = delta_method_params(&table(20, 100, 10, 50), None).unwrap();
        assert_eq!((a.mu1, a.mu2), (0.0, 0.0));
        assert!(matches!(
            delta_method_params(&table(0, 10, 3, 10), None),
            Err(GrrrError::ZeroCell { .. })
        ));
        let a = delta_method_params(&table(0, 10, 3, 10), Some(0.5)).unwrap();
        assert!((a.mu1 - (3.5f64 / 0.5).ln()).abs() < 1e-14);
        let b = delta_method_params(&table(0, 10, 3, 10).label_flipped(), Some(0.5)).unwrap();
        assert_eq!(
            (a.mu1, a.sigma1_sq, a.mu2, a.sigma2_sq),
            (b.mu2, b.sigma2_sq, b.mu1, b.sigma1_sq)
        );
        assert!((a.sigma1_sq - (7.5 / (3.5 * 11.0) + 10.5 / (0.5 * 11.0))).abs() < 1e-12);
    }

    #[test]
    fn estimate_study_flags_and_corrects() {
        let opts = EstimateOptions::default();
        let e = estimate_study(&table(0, 10, 0, 12), &opts).unwrap();
        assert!(e.degenerate && e.sigma2 == 0.0 && e.theta_hat == 0.0);
        let t = table(4, 20, 0, 15);
        let e = estimate_study(&t, &opts).unwrap();
        assert_eq!(e.theta_hat, -1.0);
        let corrected = EstimateOptions {
            correct_boundary_theta: true,
            ..opts
        };
        let e = estimate_study(&t, &corrected).unwrap();
        let want = (0.5 / 16.0) / (4.5 / 21.0) - 1.0;
        assert!((e.theta_hat - want).abs() < 1e-15);
        let none = EstimateOptions {
            zero_correction: None,
            ..opts
        };
        assert!(estimate_study(&t, &none).unwrap().sigma1_sq.is_none());
    }

    fn small_table() -> impl Strategy<Value = StudyTable> {
        (1u64..=60, 1u64..=60)
            .prop_flat_map(|(n1, n2)| (0..=n1, Just(n1), 0..=n2, Just(n2)))
            .prop_map(|(e1, n1, e2, n2)| table(e1, n1, e2, n2))
    }

    proptest! {
        #[test]
        fn exact_matches_brute_force(t in small_table()) {
            prop_assume!(!t.is_double_degenerate());
            let v = variance_exact(&t).unwrap();
            prop_assert!((v - brute_force(&t)).abs() < 1e-10);
            prop_assert!(v >= 0.0 && v.is_finite());
        }

        #[test]
        fn exact_label_flip_symmetry(t in small_table()) {
            let a = variance_exact(&t).unwrap();
            let b = variance_exact(&t.label_flipped()).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
