use grrr_core::GrrrError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("no studies in input")]
    NoStudies,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] GrrrError),

    #[error("could not write output: {0}")]
    Output(String),
}

pub type Result<T> = std::result::Result<T, CliError>;
