//! Split-lognormal study likelihoods integrated over a beta random effect.
//!
//! Study i contributes ∫₀¹ Lᵢ(2ψ−1) Beta(ψ; α, β) dψ where Lᵢ(θ) is the
//! split-lognormal density of θ̂ᵢ and (α, β) give mean (1+θ)/2 and variance
//! τ²/4. At τ = 0 the random effect is a point mass and the contribution
//! is ln Lᵢ(θ).

use rayon::prelude::*;

use crate::error::{GrrrError, Result};
use crate::measure::{estimate_theta, StudyTable};
use crate::numeric::quadrature::{AdaptiveQuadrature, Tolerance};
use crate::numeric::special::{ln_beta_density, log_beta_unchecked};
use crate::split_lognormal::ln_pdf_unchecked;
use crate::variance::{delta_method_params, DEFAULT_ZERO_CORRECTION};

use super::direct::moment_estimate;
use super::fitting::{fit_likelihood, FitOptions};
use super::{fixed_effect_mean, shapes, LogLikelihood, MetaFit, MetaMethod};

const SPREADS: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];
const REL_TOL: f64 = 1e-10;
const PIECE_SUBDIVISIONS: usize = 400;

/// A study stored with θ̂ ≥ 0; negative estimates are kept mirrored
/// (θ̂ and θ negated, σ₁ and σ₂ swapped) and `mirrored` is set.
#[derive(Debug, Clone, PartialEq)]
struct Study {
    id: String,
    theta_hat: f64,
    sigma1: f64,
    sigma2: f64,
    mirrored: bool,
}

impl Study {
    fn observed(&self) -> f64 {
        if self.mirrored {
            -self.theta_hat
        } else {
            self.theta_hat
        }
    }

    /// Approximate standard deviation of θ̂ on its own scale.
    fn spread(&self) -> f64 {
        (1.0 - self.theta_hat) * self.sigma2
    }

    fn ln_point(&self, theta: f64) -> f64 {
        ln_pdf_unchecked(self.theta_hat, theta, self.sigma1, self.sigma2)
    }

    fn ln_integral(&self, theta: f64, tau: f64) -> Result<f64> {
        let theta = if self.mirrored { -theta } else { theta };
        if tau == 0.0 {
            return Ok(self.ln_point(theta));
        }
        let (m, mc) = (0.5 * (1.0 + theta), 0.5 * (1.0 - theta));
        let Some((a, b)) = shapes(m, mc, 0.25 * tau * tau) else {
            return Ok(f64::NEG_INFINITY);
        };
        let ln_b = log_beta_unchecked(a, b);
        let log_integrand = |psi: f64| -> f64 {
            if psi <= 0.0 || psi >= 1.0 {
                return f64::NEG_INFINITY;
            }
            self.ln_point(2.0 * psi - 1.0) + ln_beta_density(psi, 1.0 - psi, a, b)
        };

        let centre_l = 0.5 * (1.0 + self.theta_hat);
        let half_l = 0.5 * self.spread();
        let half_b = 0.5 * tau;
        let mut points = vec![0.0, 0.5, 1.0, m, centre_l];
        for k in SPREADS {
            points.extend([
                m - k * half_b,
                m + k * half_b,
                centre_l - k * half_l,
                centre_l + k * half_l,
            ]);
        }
        points.retain(|&x| (0.0..=1.0).contains(&x));
        points.sort_by(f64::total_cmp);
        points.dedup();

        let scale = points[1..points.len() - 1]
            .iter()
            .map(|&x| log_integrand(x))
            .fold(f64::NEG_INFINITY, f64::max);
        if !scale.is_finite() {
            return Ok(f64::NEG_INFINITY);
        }
        let abs = 1e-12 * half_b.min(half_l).max(1e-300);
        let quad = AdaptiveQuadrature::new(Tolerance { abs, rel: REL_TOL })
            .with_max_subdivisions(PIECE_SUBDIVISIONS);

        let mut total = 0.0;
        let mut error = 0.0;
        let mut converged = true;
        let last = points.len() - 2;
        for (idx, w) in points.windows(2).enumerate() {
            let (lo, hi) = (w[0], w[1]);
            let r = if idx == 0 && a < 1.0 {
                // ψ = t^{1/α} absorbs ψ^{α−1} dψ into dt/α.
                let f = |t: f64| {
                    let psi = t.powf(1.0 / a);
                    if psi <= 0.0 {
                        return 0.0;
                    }
                    let v =
                        self.ln_point(2.0 * psi - 1.0) + (b - 1.0) * (-psi).ln_1p() - a.ln() - ln_b;
                    (v - scale).exp()
                };
                quad.integrate(f, 0.0, hi.powf(a))
            } else if idx == last && b < 1.0 {
                let f = |s: f64| {
                    let r = s.powf(1.0 / b);
                    if r <= 0.0 {
                        return 0.0;
                    }
                    let v = self.ln_point(1.0 - 2.0 * r) + (a - 1.0) * (-r).ln_1p() - b.ln() - ln_b;
                    (v - scale).exp()
                };
                quad.integrate(f, 0.0, (1.0 - lo).powf(b))
            } else {
                quad.integrate(|x| (log_integrand(x) - scale).exp(), lo, hi)
            };
            total += r.value;
            error += r.abs_error_estimate;
            converged &= r.converged;
        }
        if !converged {
            return Err(GrrrError::QuadratureFailure {
                study_id: self.id.clone(),
                abs_error: error * scale.exp(),
            });
        }
        Ok(if total > 0.0 {
            scale + total.ln()
        } else {
            f64::NEG_INFINITY
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitLognormalLikelihood {
    studies: Vec<Study>,
}

impl SplitLognormalLikelihood {
    pub fn try_loglik(&self, theta: f64, tau: f64) -> Result<f64> {
        let parts: Vec<Result<f64>> = self
            .studies
            .par_iter()
            .map(|s| s.ln_integral(theta, tau))
            .collect();
        let mut total = 0.0;
        for p in parts {
            total += p?;
        }
        Ok(total)
    }

    pub fn len(&self) -> usize {
        self.studies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.studies.is_empty()
    }
}

impl LogLikelihood for SplitLognormalLikelihood {
    fn loglik(&self, theta: f64, tau: f64) -> f64 {
        self.try_loglik(theta, tau).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitModelOptions {
    /// Added to every cell of a table with a 0 or 1 proportion.
    pub zero_correction: f64,
    pub fit: FitOptions,
}

impl Default for SplitModelOptions {
    fn default() -> Self {
        Self {
            zero_correction: DEFAULT_ZERO_CORRECTION,
            fit: FitOptions::default(),
        }
    }
}

/// Builds the likelihood, setting aside tables with both proportions 0 or
/// both 1. Returns the ids set aside.
pub(crate) fn build(
    tables: &[StudyTable],
    zero_correction: f64,
) -> Result<(SplitLognormalLikelihood, Vec<String>)> {
    let mut studies = Vec::new();
    let mut dropped = Vec::new();
    for t in tables {
        t.validate()?;
        if t.is_double_degenerate() {
            dropped.push(t.study_id.clone());
            continue;
        }
        let approx = delta_method_params(t, Some(zero_correction))?;
        let theta_hat = if t.has_boundary_proportion() {
            t.corrected_theta(zero_correction)
        } else {
            estimate_theta(t).theta.value()
        };
        let (s1, s2) = (approx.sigma1(), approx.sigma2());
        let mirrored = theta_hat < 0.0;
        studies.push(Study {
            id: t.study_id.clone(),
            theta_hat: theta_hat.abs(),
            sigma1: if mirrored { s2 } else { s1 },
            sigma2: if mirrored { s1 } else { s2 },
            mirrored,
        });
    }
    Ok((SplitLognormalLikelihood { studies }, dropped))
}

impl SplitLognormalLikelihood {
    pub fn from_tables(tables: &[StudyTable], zero_correction: f64) -> Result<Self> {
        Ok(build(tables, zero_correction)?.0)
    }
}

pub fn fit_split_lognormal_model(
    tables: &[StudyTable],
    options: &SplitModelOptions,
) -> Result<MetaFit> {
    let (lik, discarded) = build(tables, options.zero_correction)?;
    if lik.len() < 2 {
        return Err(GrrrError::TooFewStudies {
            needed: 2,
            got: lik.len(),
        });
    }
    let theta: Vec<f64> = lik.studies.iter().map(Study::observed).collect();
    let var: Vec<f64> = lik.studies.iter().map(|s| s.spread().powi(2)).collect();
    let start = fixed_effect_mean(&theta, &var);
    let m = moment_estimate(&theta, &var);
    let fit = fit_likelihood(&lik, start, m.tau2.sqrt(), &options.fit)?;
    // Surface a quadrature failure at the optimum instead of a bare NaN.
    lik.try_loglik(fit.theta, fit.tau)?;
    Ok(MetaFit {
        method: MetaMethod::SplitLognormal,
        theta_hat: fit.theta,
        se_theta: fit.se_theta,
        tau_hat: fit.tau,
        se_tau: Some(fit.se_tau),
        i_squared: None,
        loglik: Some(fit.loglik),
        n_studies_used: lik.len(),
        discarded,
        diagnostics: fit.diagnostics,
    })
}
