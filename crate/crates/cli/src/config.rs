use clap::ValueEnum;
use grrr_core::variance::{
    DEFAULT_BOOTSTRAP_REPLICATES, DEFAULT_ZERO_CORRECTION, MIN_BOOTSTRAP_REPLICATES,
};
use grrr_core::{MetaMethod, VarianceMethod};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    DirectMl,
    DirectDl,
    Beta,
    SplitLognormal,
}

impl Model {
    pub fn method(self) -> MetaMethod {
        match self {
            Model::DirectMl => MetaMethod::DirectMl,
            Model::DirectDl => MetaMethod::DirectDl,
            Model::Beta => MetaMethod::Beta,
            Model::SplitLognormal => MetaMethod::SplitLognormal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variance {
    Exact,
    Bootstrap,
    Approx,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConfig {
    pub model: Model,
    pub variance: Variance,
    pub zero_correction: f64,
    pub bootstrap_reps: u64,
    pub seed: u64,
    pub alpha: f64,
    pub baseline_risk: Option<f64>,
    /// Whether the counted event is an adverse outcome.
    pub event_is_harm: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            model: Model::DirectMl,
            variance: Variance::Exact,
            zero_correction: DEFAULT_ZERO_CORRECTION,
            bootstrap_reps: DEFAULT_BOOTSTRAP_REPLICATES,
            seed: 0,
            alpha: 0.05,
            baseline_risk: None,
            event_is_harm: true,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.zero_correction.is_finite() && self.zero_correction >= 0.0) {
            return Err(CliError::Config(format!(
                "zero-correction must be a non-negative number, got {}",
                self.zero_correction
            )));
        }
        if self.model == Model::SplitLognormal && self.zero_correction == 0.0 {
            return Err(CliError::Config(
                "the split-lognormal model needs a positive zero-correction".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.variance == Variance::Bootstrap && self.bootstrap_reps < MIN_BOOTSTRAP_REPLICATES {
            return Err(CliError::Config(format!(
                "bootstrap-reps must be at least {MIN_BOOTSTRAP_REPLICATES}, got {}",
                self.bootstrap_reps
            )));
        }
        if let Some(p) = self.baseline_risk {
            if !(p > 0.0 && p < 1.0) {
                return Err(CliError::Config(format!(
                    "baseline risk must lie in (0, 1), got {p}"
                )));
            }
        }
        Ok(())
    }

    pub fn variance_method(&self) -> VarianceMethod {
        match self.variance {
            Variance::Exact => VarianceMethod::Exact,
            Variance::Bootstrap => VarianceMethod::Bootstrap {
                replicates: self.bootstrap_reps,
                seed: self.seed,
            },
            Variance::Approx => VarianceMethod::Analytic,
        }
    }

    pub fn zero_correction(&self) -> Option<f64> {
        (self.zero_correction > 0.0).then_some(self.zero_correction)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        AnalysisConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_out_of_domain() {
        let bad = [
            AnalysisConfig {
                alpha: 1.0,
                ..Default::default()
            },
            AnalysisConfig {
                zero_correction: -0.1,
                ..Default::default()
            },
            AnalysisConfig {
                variance: Variance::Bootstrap,
                bootstrap_reps: 10,
                ..Default::default()
            },
            AnalysisConfig {
                baseline_risk: Some(0.0),
                ..Default::default()
            },
            AnalysisConfig {
                model: Model::SplitLognormal,
                zero_correction: 0.0,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}
