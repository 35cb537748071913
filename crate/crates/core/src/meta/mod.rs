//! Two-stage random-effects meta-analysis on the GRRR scale.
//!
//! Each fitter pools per-study estimates into a common effect θ with a
//! between-study spread τ. The direct models treat θ̂ᵢ as normal, the beta
//! model works with ψ = (1+θ)/2 on (0, 1), and the split-lognormal model
//! integrates the approximate study likelihood over a beta random effect.

mod beta;
mod direct;
mod fitting;
mod split;

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, GrrrError, Result};

pub use beta::{fit_beta_model, BetaLikelihood};
pub use direct::{fit_direct_dl, fit_direct_ml, DirectLikelihood};
pub use fitting::{fit_likelihood, FitOptions, LikelihoodFit};
pub use split::{fit_split_lognormal_model, SplitLognormalLikelihood, SplitModelOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetaMethod {
    DirectMl,
    DirectDl,
    Beta,
    SplitLognormal,
}

impl MetaMethod {
    pub fn label(self) -> &'static str {
        match self {
            MetaMethod::DirectMl => "direct-ml",
            MetaMethod::DirectDl => "direct-dl",
            MetaMethod::Beta => "beta",
            MetaMethod::SplitLognormal => "split-lognormal",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub converged: bool,
    pub iterations: usize,
    /// Norm of the central-difference log-likelihood gradient at the optimum.
    pub gradient_norm: Option<f64>,
    /// θ reached from each start, the default start first.
    pub restart_thetas: Vec<f64>,
    pub restart_logliks: Vec<f64>,
    pub tau_on_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaFit {
    pub method: MetaMethod,
    pub theta_hat: f64,
    pub se_theta: f64,
    pub tau_hat: f64,
    /// Absent for the moment estimator.
    pub se_tau: Option<f64>,
    /// Percent of variation due to heterogeneity, for the direct models.
    pub i_squared: Option<f64>,
    pub loglik: Option<f64>,
    pub n_studies_used: usize,
    pub discarded: Vec<String>,
    pub diagnostics: FitDiagnostics,
}

/// Per-study likelihood contributions summed over studies.
pub trait LogLikelihood: Sync {
    fn loglik(&self, theta: f64, tau: f64) -> f64;
}

/// A beta distribution described by its mean and variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaMoments {
    pub psi: f64,
    pub variance: f64,
    pub alpha: f64,
    pub beta: f64,
}

pub fn beta_reparam(psi: f64, variance: f64) -> Result<BetaMoments> {
    check_finite("psi", psi)?;
    check_finite("variance", variance)?;
    if psi <= 0.0 || psi >= 1.0 {
        return Err(GrrrError::Domain {
            name: "psi",
            value: psi,
            domain: "(0, 1)",
        });
    }
    match shapes(psi, 1.0 - psi, variance) {
        Some((alpha, beta)) => Ok(BetaMoments {
            psi,
            variance,
            alpha,
            beta,
        }),
        None => Err(GrrrError::MomentInfeasible {
            variance,
            limit: psi * (1.0 - psi),
        }),
    }
}

/// Beta shapes from a mean given with its complement, or `None` when the
/// variance is not in (0, ψ(1−ψ)).
pub(crate) fn shapes(psi: f64, one_minus_psi: f64, variance: f64) -> Option<(f64, f64)> {
    let k = psi * one_minus_psi / variance - 1.0;
    if !(variance > 0.0) || !(k > 0.0) || !k.is_finite() {
        return None;
    }
    let (a, b) = (psi * k, one_minus_psi * k);
    (a > 0.0 && b > 0.0).then_some((a, b))
}

/// Inverse-variance pooled mean of the estimates.
pub(crate) fn fixed_effect_mean(theta: &[f64], var: &[f64]) -> f64 {
    let (mut sw, mut swt) = (0.0, 0.0);
    for (t, v) in theta.iter().zip(var) {
        sw += 1.0 / v;
        swt += t / v;
    }
    swt / sw
}
