//! Command-line front end: CSV ingestion, model dispatch, plain-language
//! summaries and JSON/CSV reports.

pub mod analysis;
pub mod config;
pub mod convert;
pub mod dataset;
pub mod error;
pub mod report;
pub mod summary;

pub use analysis::{estimate_studies, pooled_interval, run_analysis, AnalysisReport, StudyRecord};
pub use config::{AnalysisConfig, Format, Model, Variance};
pub use convert::{convert_mode, Conversion};
pub use dataset::{dataset_hash, parse_dataset};
pub use error::{CliError, Result};
pub use report::{emit_report, emit_studies, JsonReport, StudiesReport};
pub use summary::{render_plain_language, render_summary};
