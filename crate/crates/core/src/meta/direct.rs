//! θ̂ᵢ used directly as normal outcomes: θ̂ᵢ ~ N(θ, σᵢ² + τ²).

use crate::error::{GrrrError, Result};
use crate::variance::GrrrEstimate;

use super::fitting::{fit_likelihood, FitOptions};
use super::{fixed_effect_mean, FitDiagnostics, LogLikelihood, MetaFit, MetaMethod};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct DirectLikelihood {
    pub theta_hat: Vec<f64>,
    pub variance: Vec<f64>,
}

impl LogLikelihood for DirectLikelihood {
    fn loglik(&self, theta: f64, tau: f64) -> f64 {
        let t2 = tau * tau;
        self.theta_hat
            .iter()
            .zip(&self.variance)
            .map(|(&y, &v)| {
                let s = v + t2;
                let d = y - theta;
                -0.5 * (LN_2PI + s.ln() + d * d / s)
            })
            .sum()
    }
}

/// Splits estimates into usable (θ̂, σ²) columns and the ids set aside.
pub(crate) fn usable(estimates: &[GrrrEstimate]) -> (Vec<f64>, Vec<f64>, Vec<String>) {
    let mut theta = Vec::new();
    let mut var = Vec::new();
    let mut dropped = Vec::new();
    for e in estimates {
        if e.is_informative() {
            theta.push(e.theta_hat);
            var.push(e.sigma2);
        } else {
            dropped.push(e.study_id.clone());
        }
    }
    (theta, var, dropped)
}

pub(crate) struct MomentEstimate {
    pub theta: f64,
    pub se: f64,
    pub tau2: f64,
    pub i_squared: f64,
}

/// DerSimonian–Laird moment estimate with I².
pub(crate) fn moment_estimate(theta: &[f64], var: &[f64]) -> MomentEstimate {
    let k = theta.len() as f64;
    let w: Vec<f64> = var.iter().map(|v| 1.0 / v).collect();
    let sw: f64 = w.iter().sum();
    let sw2: f64 = w.iter().map(|x| x * x).sum();
    let fe = fixed_effect_mean(theta, var);
    let q: f64 = theta
        .iter()
        .zip(&w)
        .map(|(t, wi)| wi * (t - fe) * (t - fe))
        .sum();
    let excess = q - (k - 1.0);
    let tau2 = (excess / (sw - sw2 / sw)).max(0.0);
    let i_squared = if q > 0.0 {
        (100.0 * excess / q).max(0.0)
    } else {
        0.0
    };
    let ws: Vec<f64> = var.iter().map(|v| 1.0 / (v + tau2)).collect();
    let sws: f64 = ws.iter().sum();
    let pooled = theta.iter().zip(&ws).map(|(t, wi)| t * wi).sum::<f64>() / sws;
    MomentEstimate {
        theta: pooled,
        se: sws.sqrt().recip(),
        tau2,
        i_squared,
    }
}

fn check_count(theta: &[f64]) -> Result<()> {
    if theta.len() < 2 {
        return Err(GrrrError::TooFewStudies {
            needed: 2,
            got: theta.len(),
        });
    }
    Ok(())
}

pub fn fit_direct_dl(estimates: &[GrrrEstimate]) -> Result<MetaFit> {
    let (theta, var, discarded) = usable(estimates);
    check_count(&theta)?;
    let m = moment_estimate(&theta, &var);
    Ok(MetaFit {
        method: MetaMethod::DirectDl,
        theta_hat: m.theta,
        se_theta: m.se,
        tau_hat: m.tau2.sqrt(),
        se_tau: None,
        i_squared: Some(m.i_squared),
        loglik: None,
        n_studies_used: theta.len(),
        discarded,
        diagnostics: FitDiagnostics {
            converged: true,
            tau_on_boundary: m.tau2 == 0.0,
            ..FitDiagnostics::default()
        },
    })
}

pub fn fit_direct_ml(estimates: &[GrrrEstimate], options: &FitOptions) -> Result<MetaFit> {
    let (theta, var, discarded) = usable(estimates);
    check_count(&theta)?;
    let start = fixed_effect_mean(&theta, &var);
    let m = moment_estimate(&theta, &var);
    let lik = DirectLikelihood {
        theta_hat: theta,
        variance: var,
    };
    let fit = fit_likelihood(&lik, start, m.tau2.sqrt(), options)?;
    Ok(MetaFit {
        method: MetaMethod::DirectMl,
        theta_hat: fit.theta,
        se_theta: fit.se_theta,
        tau_hat: fit.tau,
        se_tau: Some(fit.se_tau),
        i_squared: Some(m.i_squared),
        loglik: Some(fit.loglik),
        n_studies_used: lik.theta_hat.len(),
        discarded,
        diagnostics: fit.diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rng::RngStream;
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
    fn dl_matches_hand_computation() {
        let e = vec![
            est("a", -0.5, 0.04),
            est("b", -0.1, 0.01),
            est("c", 0.2, 0.09),
        ];
        // w = 25, 100, 100/9; Σw = 1225/9; FE = (-12.5 - 10 + 20/9) / (1225/9) = -182.5/1225
        let fe: f64 = -182.5 / 1225.0;
        let q = 25.0 * (-0.5 - fe).powi(2)
            + 100.0 * (-0.1 - fe).powi(2)
            + (100.0 / 9.0) * (0.2 - fe).powi(2);
        let sw = 1225.0 / 9.0;
        let sw2 = 625.0 + 10000.0 + 10000.0 / 81.0;
        let tau2 = (q - 2.0) / (sw - sw2 / sw);
        let ws = [
            1.0 / (0.04 + tau2),
            1.0 / (0.01 + tau2),
            1.0 / (0.09 + tau2),
        ];
        let sws: f64 = ws.iter().sum();
        let pooled = (-0.5 * ws[0] - 0.1 * ws[1] + 0.2 * ws[2]) / sws;
        let f = fit_direct_dl(&e).unwrap();
        assert!((f.theta_hat - pooled).abs() < 1e-12);
        assert!((f.se_theta - sws.powf(-0.5)).abs() < 1e-12);
        assert!((f.tau_hat - tau2.sqrt()).abs() < 1e-12);
        assert!((f.i_squared.unwrap() - 100.0 * (q - 2.0) / q).abs() < 1e-12);
    }

    #[test]
    fn dl_identical_studies() {
        let e = vec![est("a", 0.3, 0.02), est("b", 0.3, 0.05)];
        let f = fit_direct_dl(&e).unwrap();
        assert_eq!(f.tau_hat, 0.0);
        assert_eq!(f.i_squared, Some(0.0));
        assert!((f.theta_hat - 0.3).abs() < 1e-15);
    }

    #[test]
    fn too_few_studies() {
        assert!(matches!(
            fit_direct_dl(&[est("a", 0.1, 0.01)]),
            Err(GrrrError::TooFewStudies { .. })
        ));
        assert!(fit_direct_ml(&[est("a", 0.1, 0.01)], &FitOptions::default()).is_err());
        let mut d = est("b", 0.0, 0.0);
        d.degenerate = true;
        let f = fit_direct_dl(&[est("a", 0.1, 0.01), d.clone()]);
        assert!(f.is_err());
        let f = fit_direct_dl(&[est("a", 0.1, 0.01), est("c", 0.2, 0.01), d]).unwrap();
        assert_eq!(f.discarded, vec!["b".to_string()]);
    }

    #[test]
    fn ml_identical_studies_hit_the_boundary() {
        let e: Vec<_> = (0..5).map(|i| est(&i.to_string(), -0.2, 0.01)).collect();
        let f = fit_direct_ml(&e, &FitOptions::default()).unwrap();
        assert!((f.theta_hat + 0.2).abs() < 1e-8);
        assert_eq!(f.tau_hat, 0.0);
        assert_eq!(f.se_tau, Some(0.0));
        assert!((f.se_theta - (0.01f64 / 5.0).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn ml_heterogeneous_gradient_and_restarts() {
        let e = vec![
            est("a", -0.6, 0.02),
            est("b", -0.1, 0.01),
            est("c", 0.2, 0.03),
            est("d", -0.4, 0.015),
            est("e", 0.05, 0.02),
        ];
        let f = fit_direct_ml(&e, &FitOptions::default()).unwrap();
        assert!(f.tau_hat > 0.1);
        assert!(f.diagnostics.gradient_norm.unwrap() < 1e-4);
        for t in &f.diagnostics.restart_thetas {
            assert!((t - f.theta_hat).abs() < 1e-5);
        }
    }

    #[test]
    fn ml_consistency_under_the_model() {
        let (theta_true, tau_true, k) = (-0.25, 0.1, 200);
        let mut covered = 0;
        for rep in 0..100 {
            let mut rng = RngStream::new(77, rep);
            let e: Vec<_> = (0..k)
                .map(|i| {
                    let var = 0.005 + 0.03 * rng.next_f64();
                    let y = theta_true + (tau_true * tau_true + var).sqrt() * rng.next_normal();
                    est(&i.to_string(), y, var)
                })
                .collect();
            let f = fit_direct_ml(&e, &FitOptions::default()).unwrap();
            if (f.theta_hat - theta_true).abs() < 3.0 * f.se_theta {
                covered += 1;
            }
        }
        assert!(covered >= 90, "{covered}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn label_flip_equivariance(
            ys in proptest::collection::vec(-0.9f64..0.9, 3..8),
            vs in proptest::collection::vec(0.002f64..0.1, 8),
        ) {
            let e: Vec<_> = ys.iter().zip(&vs).enumerate().map(|(i, (y, v))| est(&i.to_string(), *y, *v)).collect();
            let flipped: Vec<_> = e.iter().map(|x| est(&x.study_id, -x.theta_hat, x.sigma2)).collect();
            let opts = FitOptions::default();
            let (a, b) = (fit_direct_ml(&e, &opts).unwrap(), fit_direct_ml(&flipped, &opts).unwrap());
            prop_assert!((a.theta_hat + b.theta_hat).abs() < 1e-8);
            prop_assert!((a.tau_hat - b.tau_hat).abs() < 1e-8);
            prop_assert!((a.se_theta - b.se_theta).abs() < 1e-8);
            let (c, d) = (fit_direct_dl(&e).unwrap(), fit_direct_dl(&flipped).unwrap());
            prop_assert!((c.theta_hat + d.theta_hat).abs() < 1e-12);
            prop_assert!((c.tau_hat - d.tau_hat).abs() < 1e-12);
        }
    }
}
