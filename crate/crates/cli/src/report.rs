//! Machine-readable output. Field order is fixed by the struct layouts, so
//! identical inputs give identical bytes.

use grrr_core::meta::FitDiagnostics;
use serde::{Deserialize, Serialize};

use crate::analysis::{AnalysisReport, StudyRecord};
use crate::config::{Format, Model, Variance};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pooled {
    pub theta: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tau {
    pub estimate: f64,
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonReport {
    pub model: Model,
    pub pooled: Pooled,
    pub tau: Tau,
    pub i_squared: Option<f64>,
    pub studies: Vec<StudyRecord>,
    pub summary: String,
    pub alpha: f64,
    /// Within-study variance method; null for the split-lognormal model.
    pub variance: Option<Variance>,
    pub bootstrap_reps: Option<u64>,
    pub seed: u64,
    pub zero_correction: f64,
    pub loglik: Option<f64>,
    pub n_studies_used: usize,
    pub discarded: Vec<String>,
    pub diagnostics: FitDiagnostics,
    pub dataset_sha256: String,
}

impl From<&AnalysisReport> for JsonReport {
    fn from(r: &AnalysisReport) -> Self {
        let c = &r.config;
        let split = c.model == Model::SplitLognormal;
        Self {
            model: c.model,
            pooled: Pooled {
                theta: r.fit.theta_hat,
                se: r.fit.se_theta,
                ci_lower: r.pooled_ci.0,
                ci_upper: r.pooled_ci.1,
            },
            tau: Tau {
                estimate: r.fit.tau_hat,
                se: r.fit.se_tau,
            },
            i_squared: r.fit.i_squared,
            studies: r.per_study.clone(),
            summary: r.summary_text.clone(),
            alpha: c.alpha,
            variance: (!split).then_some(c.variance),
            bootstrap_reps: (!split && c.variance == Variance::Bootstrap)
                .then_some(c.bootstrap_reps),
            seed: c.seed,
            zero_correction: c.zero_correction,
            loglik: r.fit.loglik,
            n_studies_used: r.fit.n_studies_used,
            discarded: r.fit.discarded.clone(),
            diagnostics: r.fit.diagnostics.clone(),
            dataset_sha256: r.dataset_hash.clone(),
        }
    }
}

/// One row of the CSV output; `flag` is `STUDY` or `POOLED`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub flag: String,
    pub study_id: String,
    pub theta: f64,
    pub se: Option<f64>,
    pub variance: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub used: Option<bool>,
    pub note: Option<String>,
}

impl From<&StudyRecord> for CsvRow {
    fn from(s: &StudyRecord) -> Self {
        Self {
            flag: "STUDY".into(),
            study_id: s.study_id.clone(),
            theta: s.theta_hat,
            se: s.variance.map(f64::sqrt),
            variance: s.variance,
            ci_lower: s.ci_lower,
            ci_upper: s.ci_upper,
            used: Some(s.used),
            note: s.discard_reason.clone(),
        }
    }
}

fn pooled_row(r: &AnalysisReport) -> CsvRow {
    CsvRow {
        flag: "POOLED".into(),
        study_id: "pooled".into(),
        theta: r.fit.theta_hat,
        se: Some(r.fit.se_theta),
        variance: Some(r.fit.se_theta * r.fit.se_theta),
        ci_lower: Some(r.pooled_ci.0),
        ci_upper: Some(r.pooled_ci.1),
        used: None,
        note: Some(format!("tau={}", r.fit.tau_hat)),
    }
}

fn write_csv(rows: &[CsvRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)
            .map_err(|e| CliError::Output(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Output(e.to_string()))
}

fn write_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

pub fn emit_report(report: &AnalysisReport, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => write_json(&JsonReport::from(report)),
        Format::Csv => {
            let mut rows: Vec<CsvRow> = report.per_study.iter().map(CsvRow::from).collect();
            rows.push(pooled_row(report));
            write_csv(&rows)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudiesReport {
    pub studies: Vec<StudyRecord>,
    pub dataset_sha256: String,
}

pub fn emit_studies(report: &StudiesReport, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => write_json(report),
        Format::Csv => write_csv(&report.studies.iter().map(CsvRow::from).collect::<Vec<_>>()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::run_analysis;
    use crate::config::AnalysisConfig;
    use grrr_core::StudyTable;

    fn report() -> AnalysisReport {
        let tables = vec![
            StudyTable::new("a", 10, 100, 5, 100).unwrap(),
            StudyTable::new("b", 20, 120, 12, 110).unwrap(),
            StudyTable::new("c", 8, 90, 9, 95).unwrap(),
            StudyTable::new("d", 0, 50, 0, 50).unwrap(),
        ];
        run_analysis(
            &AnalysisConfig {
                model: Model::DirectDl,
                ..Default::default()
            },
            &tables,
        )
        .unwrap()
    }

    #[test]
    fn json_round_trip() {
        let r = report();
        let bytes = emit_report(&r, Format::Json).unwrap();
        let back: JsonReport = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(back, JsonReport::from(&r));
        let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        let pos: Vec<_> = ["model", "pooled", "tau", "i_squared", "studies", "summary"]
            .iter()
            .map(|k| text.find(&format!("\n  \"{k}\":")).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(
            v["studies"].as_array().unwrap().len(),
            r.fit.n_studies_used + r.fit.discarded.len()
        );
    }

    #[test]
    fn csv_has_pooled_row() {
        let r = report();
        let bytes = emit_report(&r, Format::Csv).unwrap();
        let mut rdr = csv::Reader::from_reader(&bytes[..]);
        let rows: Vec<CsvRow> = rdr
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .unwrap();
        assert_eq!(rows.len(), 5);
        let last = rows.last().unwrap();
        assert_eq!(last.flag, "POOLED");
        assert_eq!(last.theta, r.fit.theta_hat);
        assert_eq!(last.se, Some(r.fit.se_theta));
        assert_eq!(rows[3].used, Some(false));
        assert!(rows[3].note.as_deref().unwrap().contains("0%"));
        for (row, s) in rows.iter().zip(&r.per_study) {
            assert_eq!(row.theta, s.theta_hat);
            assert_eq!(row.variance, s.variance);
            assert_eq!(row.ci_lower, s.ci_lower);
        }
    }
}
