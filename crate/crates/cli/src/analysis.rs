//! Dispatch from a configuration to the per-study estimates and the pooled fit.

use grrr_core::meta::FitOptions;
use grrr_core::numeric::std_normal_quantile;
use grrr_core::split_lognormal::confidence_interval;
use grrr_core::{
    delta_method_params, estimate_study, estimate_theta, fit_beta_model, fit_direct_dl,
    fit_direct_ml, fit_split_lognormal_model, EstimateOptions, GrrrError, GrrrEstimate, MetaFit,
    SplitModelOptions, StudyTable,
};
use serde::{Deserialize, Serialize};

use crate::config::{AnalysisConfig, Model};
use crate::dataset::dataset_hash;
use crate::error::Result;
use crate::summary::render_plain_language;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub study_id: String,
    pub theta_hat: f64,
    /// Within-study variance of θ̂; absent for the split-lognormal model.
    pub variance: Option<f64>,
    pub sigma1_sq: Option<f64>,
    pub sigma2_sq: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub used: bool,
    pub discard_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub config: AnalysisConfig,
    pub fit: MetaFit,
    pub pooled_ci: (f64, f64),
    pub per_study: Vec<StudyRecord>,
    pub summary_text: String,
    pub dataset_hash: String,
}

/// Normal-approximation interval for the pooled θ, clipped to [−1, 1].
pub fn pooled_interval(fit: &MetaFit, alpha: f64) -> Result<(f64, f64)> {
    let z = -std_normal_quantile(0.5 * alpha)?;
    let lo = (fit.theta_hat - z * fit.se_theta).max(-1.0);
    let hi = (fit.theta_hat + z * fit.se_theta).min(1.0);
    Ok((lo, hi))
}

fn estimate_options(config: &AnalysisConfig) -> EstimateOptions {
    EstimateOptions {
        method: config.variance_method(),
        zero_correction: config.zero_correction(),
        correct_boundary_theta: config.model == Model::Beta,
        ..EstimateOptions::default()
    }
}

/// θ̂ on which the split-lognormal interval is centred: the corrected value
/// when a proportion sits at 0 or 1.
fn centre(table: &StudyTable, zero_correction: Option<f64>) -> f64 {
    match zero_correction {
        Some(c) if table.has_boundary_proportion() => table.corrected_theta(c),
        _ => estimate_theta(table).theta.value(),
    }
}

fn study_interval(
    table: &StudyTable,
    config: &AnalysisConfig,
) -> Result<Option<(f64, f64, f64, f64)>> {
    match delta_method_params(table, config.zero_correction()) {
        Ok(a) => {
            let (lo, hi) =
                confidence_interval(centre(table, config.zero_correction()), &a, config.alpha)?;
            Ok(Some((a.sigma1_sq, a.sigma2_sq, lo, hi)))
        }
        Err(GrrrError::ZeroCell { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn discard_reason(table: &StudyTable) -> String {
    if table.is_double_degenerate() {
        "both arms at 0% or both at 100%; no information on the effect".into()
    } else {
        "zero within-study variance".into()
    }
}

/// Per-study estimates with split-lognormal intervals, without pooling.
pub fn estimate_studies(
    config: &AnalysisConfig,
    tables: &[StudyTable],
) -> Result<Vec<StudyRecord>> {
    config.validate()?;
    Ok(study_records(config, tables)?.0)
}

fn study_records(
    config: &AnalysisConfig,
    tables: &[StudyTable],
) -> Result<(Vec<StudyRecord>, Vec<GrrrEstimate>)> {
    let split = config.model == Model::SplitLognormal;
    let options = estimate_options(config);
    let mut out = Vec::with_capacity(tables.len());
    let mut estimates = Vec::new();
    for t in tables {
        let interval = study_interval(t, config)?;
        let (theta_hat, variance, used) = if split {
            (
                centre(t, config.zero_correction()),
                None,
                !t.is_double_degenerate(),
            )
        } else {
            let e = estimate_study(t, &options)?;
            let row = (e.theta_hat, Some(e.sigma2), e.is_informative());
            estimates.push(e);
            row
        };
        out.push(StudyRecord {
            study_id: t.study_id.clone(),
            theta_hat,
            variance,
            sigma1_sq: interval.map(|i| i.0),
            sigma2_sq: interval.map(|i| i.1),
            ci_lower: interval.map(|i| i.2),
            ci_upper: interval.map(|i| i.3),
            used,
            discard_reason: (!used).then(|| discard_reason(t)),
        });
    }
    Ok((out, estimates))
}

pub fn run_analysis(config: &AnalysisConfig, tables: &[StudyTable]) -> Result<AnalysisReport> {
    config.validate()?;
    let (per_study, estimates) = study_records(config, tables)?;
    let fit_options = FitOptions::default();
    let fit = match config.model {
        Model::SplitLognormal => fit_split_lognormal_model(
            tables,
            &SplitModelOptions {
                zero_correction: config.zero_correction,
                fit: fit_options,
            },
        )?,
        Model::DirectDl => fit_direct_dl(&estimates)?,
        Model::DirectMl => fit_direct_ml(&estimates, &fit_options)?,
        Model::Beta => fit_beta_model(&estimates, &fit_options)?,
    };
    let pooled_ci = pooled_interval(&fit, config.alpha)?;
    let summary_text = render_plain_language(&fit, config.alpha, config.event_is_harm)?;
    Ok(AnalysisReport {
        config: *config,
        fit,
        pooled_ci,
        per_study,
        summary_text,
        dataset_hash: dataset_hash(tables),
    })
}
