//! ψ̂ᵢ = (1+θ̂ᵢ)/2 as beta outcomes with mean (1+θ)/2 and variance (σᵢ²+τ²)/4.

use std::f64::consts::LN_2;

use crate::error::{GrrrError, Result};
use crate::numeric::special::ln_beta_density;
use crate::variance::GrrrEstimate;

use super::direct::{moment_estimate, usable};
use super::fitting::{fit_likelihood, FitOptions};
use super::{fixed_effect_mean, shapes, LogLikelihood, MetaFit, MetaMethod};

#[derive(Debug, Clone, PartialEq)]
pub struct BetaLikelihood {
    psi: Vec<f64>,
    one_minus_psi: Vec<f64>,
    variance: Vec<f64>,
}

impl BetaLikelihood {
    pub fn new(theta_hat: &[f64], variance: &[f64]) -> Self {
        Self {
            psi: theta_hat.iter().map(|t| 0.5 * (1.0 + t)).collect(),
            one_minus_psi: theta_hat.iter().map(|t| 0.5 * (1.0 - t)).collect(),
            variance: variance.to_vec(),
        }
    }
}

impl LogLikelihood for BetaLikelihood {
    /// On the θ̂ scale: each study contributes its ψ̂ density minus ln 2.
    fn loglik(&self, theta: f64, tau: f64) -> f64 {
        let (m, mc) = (0.5 * (1.0 + theta), 0.5 * (1.0 - theta));
        let t2 = tau * tau;
        let mut total = 0.0;
        for i in 0..self.psi.len() {
            let Some((a, b)) = shapes(m, mc, 0.25 * (self.variance[i] + t2)) else {
                return f64::NEG_INFINITY;
            };
            total += ln_beta_density(self.psi[i], self.one_minus_psi[i], a, b) - LN_2;
        }
        total
    }
}

/// Estimates must lie strictly inside (−1, 1); tables with a zero cell
/// should be estimated with a boundary correction first.
pub fn fit_beta_model(estimates: &[GrrrEstimate], options: &FitOptions) -> Result<MetaFit> {
    let (theta, var, discarded) = usable(estimates);
    if theta.len() < 2 {
        return Err(GrrrError::TooFewStudies {
            needed: 2,
            got: theta.len(),
        });
    }
    for e in estimates.iter().filter(|e| e.is_informative()) {
        if e.theta_hat <= -1.0 || e.theta_hat >= 1.0 {
            return Err(GrrrError::BoundaryEstimate {
                study_id: e.study_id.clone(),
                theta_hat: e.theta_hat,
            });
        }
    }
    let start = fixed_effect_mean(&theta, &var);
    let m = moment_estimate(&theta, &var);
    let lik = BetaLikelihood::new(&theta, &var);
    let fit = fit_likelihood(&lik, start, m.tau2.sqrt(), options)?;
    Ok(MetaFit {
        method: MetaMethod::Beta,
        theta_hat: fit.theta,
        se_theta: fit.se_theta,
        tau_hat: fit.tau,
        se_tau: Some(fit.se_tau),
        i_squared: None,
        loglik: Some(fit.loglik),
        n_studies_used: theta.len(),
        discarded,
        diagnostics: fit.diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meta::fit_direct_ml;
    use proptest::prelude::*;

    fn est(id: &str, theta: f64, var: f64) -> GrrrEstimate {
        GrrrEstimate {
            study_id: id.into(),
            theta_hat: theta,
            sigma2: var,
            sigma1_sq: None,
            sigma2_sq: None,
            degenerate: false,
        }
    }

    #[test]
    fn infeasible_moments_are_penalized() {
        let lik = BetaLikelihood::new(&[0.1, 0.2], &[0.01, 0.02]);
        assert_eq!(lik.loglik(0.0, 2.0), f64::NEG_INFINITY);
        assert!(lik.loglik(0.0, 0.1).is_finite());
    }

    #[test]
    fn boundary_estimates_are_rejected() {
        let e = vec![est("a", -1.0, 0.01), est("b", 0.2, 0.02)];
        assert!(matches!(
            fit_beta_model(&e, &FitOptions::default()),
            Err(GrrrError::BoundaryEstimate { .. })
        ));
    }

    #[test]
    fn agrees_with_direct_at_small_variance() {
        let ys = [-0.31, -0.28, -0.35, -0.26, -0.3];
        let e: Vec<_> = ys
            .iter()
            .enumerate()
            .map(|(i, y)| est(&i.to_string(), *y, 1e-4))
            .collect();
        let opts = FitOptions::default();
        let b = fit_beta_model(&e, &opts).unwrap();
        let d = fit_direct_ml(&e, &opts).unwrap();
        assert!(
            (b.theta_hat - d.theta_hat).abs() < 1e-3,
            "{} vs {}",
            b.theta_hat,
            d.theta_hat
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn label_flip_equivariance(
            ys in proptest::collection::vec(-0.8f64..0.8, 3..7),
            vs in proptest::collection::vec(0.002f64..0.05, 7),
        ) {
            let e: Vec<_> = ys.iter().zip(&vs).enumerate().map(|(i, (y, v))| est(&i.to_string(), *y, *v)).collect();
            let flipped: Vec<_> = e.iter().map(|x| est(&x.study_id, -x.theta_hat, x.sigma2)).collect();
            let opts = FitOptions::default();
            let (a, b) = (fit_beta_model(&e, &opts).unwrap(), fit_beta_model(&flipped, &opts).unwrap());
            prop_assert!((a.theta_hat + b.theta_hat).abs() < 1e-8);
            prop_assert!((a.tau_hat - b.tau_hat).abs() < 1e-8);
            prop_assert!((a.se_theta - b.se_theta).abs() < 1e-8);
        }
    }
}
