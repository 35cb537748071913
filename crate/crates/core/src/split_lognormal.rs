//! Approximate sampling distribution of θ̂.
//!
//! Below zero, 1 + θ̂ is lognormal with log-scale (μ₁, σ₁). At or above zero,
//! 1 − θ̂ is lognormal with log-scale (μ₂, σ₂). The true effect θ fixes the
//! location of one side and the other follows from μ₁/σ₁ = −μ₂/σ₂, which
//! keeps the mass on each side of zero consistent.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, GrrrError, Result};
use crate::numeric::normal::{ln_std_normal_pdf, std_normal_cdf, std_normal_quantile};

/// Delta-method moments of ln(q̂/p̂) and ln((1−q̂)/(1−p̂)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitLognormalApprox {
    pub mu1: f64,
    pub sigma1_sq: f64,
    pub mu2: f64,
    pub sigma2_sq: f64,
}

impl SplitLognormalApprox {
    pub fn new(mu1: f64, sigma1_sq: f64, mu2: f64, sigma2_sq: f64) -> Result<Self> {
        check_finite("mu1", mu1)?;
        check_finite("mu2", mu2)?;
        for (name, v) in [("sigma1_sq", sigma1_sq), ("sigma2_sq", sigma2_sq)] {
            check_finite(name, v)?;
            if v <= 0.0 {
                return Err(GrrrError::Domain {
                    name,
                    value: v,
                    domain: "(0, inf)",
                });
            }
        }
        Ok(Self {
            mu1,
            sigma1_sq,
            mu2,
            sigma2_sq,
        })
    }

    /// Scale-only approximation, for working with the distribution directly.
    pub fn from_scales(sigma1: f64, sigma2: f64) -> Result<Self> {
        Self::new(0.0, sigma1 * sigma1, 0.0, sigma2 * sigma2)
    }

    pub fn sigma1(&self) -> f64 {
        self.sigma1_sq.sqrt()
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2_sq.sqrt()
    }

    /// The point estimate implied by the stored locations.
    pub fn theta_hat(&self) -> f64 {
        if self.mu1 < 0.0 {
            libm::expm1(self.mu1)
        } else {
            -libm::expm1(self.mu2)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sided {
    One,
    Two,
}

/// Log-scale locations of both sides when the true effect is `theta`.
pub fn locations(theta: f64, sigma1: f64, sigma2: f64) -> (f64, f64) {
    if theta < 0.0 {
        let mu1 = libm::log1p(theta);
        (mu1, -(sigma2 / sigma1) * mu1)
    } else {
        let mu2 = libm::log1p(-theta);
        (-(sigma1 / sigma2) * mu2, mu2)
    }
}

fn check_observation(theta_hat: f64) -> Result<f64> {
    check_finite("theta_hat", theta_hat)?;
    if theta_hat <= -1.0 || theta_hat >= 1.0 {
        return Err(GrrrError::Domain {
            name: "theta_hat",
            value: theta_hat,
            domain: "(-1, 1)",
        });
    }
    Ok(theta_hat)
}

fn check_parameter(theta: f64) -> Result<f64> {
    check_finite("theta", theta)?;
    if !(-1.0..=1.0).contains(&theta) {
        return Err(GrrrError::Domain {
            name: "theta",
            value: theta,
            domain: "[-1, 1]",
        });
    }
    Ok(theta)
}

/// Log-density without argument checks; θ̂ in (−1, 1), θ in [−1, 1].
pub(crate) fn ln_pdf_unchecked(theta_hat: f64, theta: f64, s1: f64, s2: f64) -> f64 {
    if theta <= -1.0 || theta >= 1.0 {
        return f64::NEG_INFINITY;
    }
    let (mu1, mu2) = locations(theta, s1, s2);
    if theta_hat < 0.0 {
        let x = libm::log1p(theta_hat);
        ln_std_normal_pdf((x - mu1) / s1) - libm::log(s1) - x
    } else {
        let y = libm::log1p(-theta_hat);
        ln_std_normal_pdf((y - mu2) / s2) - libm::log(s2) - y
    }
}

pub fn loglik(theta_hat: f64, theta: f64, approx: &SplitLognormalApprox) -> Result<f64> {
    check_observation(theta_hat)?;
    check_parameter(theta)?;
    Ok(ln_pdf_unchecked(
        theta_hat,
        theta,
        approx.sigma1(),
        approx.sigma2(),
    ))
}

pub fn pdf(theta_hat: f64, theta: f64, approx: &SplitLognormalApprox) -> Result<f64> {
    Ok(loglik(theta_hat, theta, approx)?.exp())
}

pub fn cdf(theta_hat: f64, theta: f64, approx: &SplitLognormalApprox) -> Result<f64> {
    check_observation(theta_hat)?;
    check_parameter(theta)?;
    let (s1, s2) = (approx.sigma1(), approx.sigma2());
    if theta <= -1.0 {
        return Ok(1.0);
    }
    if theta >= 1.0 {
        return Ok(0.0);
    }
    let (mu1, mu2) = locations(theta, s1, s2);
    Ok(if theta_hat < 0.0 {
        std_normal_cdf((libm::log1p(theta_hat) - mu1) / s1)
    } else {
        std_normal_cdf((mu2 - libm::log1p(-theta_hat)) / s2)
    })
}

/// p-value for the null θ = 0.
pub fn p_value(theta_hat: f64, approx: &SplitLognormalApprox, sided: Sided) -> Result<f64> {
    check_finite("theta_hat", theta_hat)?;
    if !(-1.0..=1.0).contains(&theta_hat) {
        return Err(GrrrError::Domain {
            name: "theta_hat",
            value: theta_hat,
            domain: "[-1, 1]",
        });
    }
    let (s1, s2) = (approx.sigma1(), approx.sigma2());
    Ok(match sided {
        Sided::One if theta_hat >= 0.0 => std_normal_cdf(libm::log1p(-theta_hat) / s2),
        Sided::One => std_normal_cdf(libm::log1p(theta_hat) / s1),
        Sided::Two => {
            let l = libm::log1p(-theta_hat.abs());
            (std_normal_cdf(l / s1) + std_normal_cdf(l / s2)).min(1.0)
        }
    })
}

/// Interval from inverting the cdf: the bounds satisfy
/// cdf(θ̂; lower) = 1 − α/2 and cdf(θ̂; upper) = α/2.
pub fn confidence_interval(
    theta_hat: f64,
    approx: &SplitLognormalApprox,
    alpha: f64,
) -> Result<(f64, f64)> {
    check_observation(theta_hat)?;
    check_finite("alpha", alpha)?;
    if alpha <= 0.0 || alpha >= 1.0 {
        return Err(GrrrError::Domain {
            name: "alpha",
            value: alpha,
            domain: "(0, 1)",
        });
    }
    let z = -std_normal_quantile(0.5 * alpha)?;
    let (s1, s2) = (approx.sigma1(), approx.sigma2());
    if theta_hat >= 0.0 {
        let rest = libm::log1p(-theta_hat);
        let upper = -libm::expm1(rest - s2 * z);
        let mut lower = -libm::expm1(rest + s2 * z);
        if lower < 0.0 {
            lower = libm::expm1(-(s1 / s2) * rest - s1 * z);
        }
        Ok((lower, upper))
    } else {
        let rest = libm::log1p(theta_hat);
        let lower = libm::expm1(rest - s1 * z);
        let mut upper = libm::expm1(rest + s1 * z);
        if upper > 0.0 {
            upper = -libm::expm1(-(s2 / s1) * rest - s2 * z);
        }
        Ok((lower, upper))
    }
}
