//! Re-expressing a reported odds ratio on the GRRR scale.

use grrr_core::odds_ratio_to_theta;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conversion {
    pub odds_ratio: f64,
    pub or_ci_lower: f64,
    pub or_ci_upper: f64,
    pub baseline_risk: f64,
    pub theta: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

/// Maps the odds ratio and each interval endpoint through the conversion
/// at a fixed baseline risk.
pub fn convert_mode(
    or_value: f64,
    (lower, upper): (f64, f64),
    baseline_risk: f64,
) -> Result<Conversion> {
    if !(lower > 0.0 && lower <= or_value && or_value <= upper && upper.is_finite()) {
        return Err(CliError::Config(format!(
            "need 0 < lower <= OR <= upper, got {lower} <= {or_value} <= {upper}"
        )));
    }
    let f = |x: f64| odds_ratio_to_theta(x, baseline_risk).map(|t| t.value());
    Ok(Conversion {
        odds_ratio: or_value,
        or_ci_lower: lower,
        or_ci_upper: upper,
        baseline_risk,
        theta: f(or_value)?,
        ci_lower: f(lower)?,
        ci_upper: f(upper)?,
    })
}
