use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrrrError {
    #[error("non-finite value for {name}: {value}")]
    NonFinite { name: &'static str, value: f64 },

    #[error("{name} = {value} is outside its domain ({domain})")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid table {study_id}: {reason}")]
    InvalidTable { study_id: String, reason: String },

    #[error("study {study_id} has a zero or full cell and no zero-correction was configured")]
    ZeroCell { study_id: String },

    #[error("enumeration of study {study_id} needs {cells} cells, above the cap of {cap}")]
    ResourceLimit {
        study_id: String,
        cells: u64,
        cap: u64,
    },

    #[error("variance {variance} is not below psi(1-psi) = {limit}; beta moments are infeasible")]
    MomentInfeasible { variance: f64, limit: f64 },

    #[error("need at least {needed} usable studies, got {got}")]
    TooFewStudies { needed: usize, got: usize },

    #[error("study {study_id}: estimate {theta_hat} lies on the boundary; apply a zero-correction first")]
    BoundaryEstimate { study_id: String, theta_hat: f64 },

    #[error(
        "optimizer did not converge after {iterations} iterations (simplex diameter {diameter:e})"
    )]
    NonConvergence { iterations: usize, diameter: f64 },

    #[error("observed information is not positive definite at the optimum")]
    SingularInformation,

    #[error("quadrature failed for study {study_id}: error estimate {abs_error:e} after budget exhaustion")]
    QuadratureFailure { study_id: String, abs_error: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, GrrrError>;

pub(crate) fn check_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(GrrrError::NonFinite { name, value })
    }
}

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<f64> {
    check_finite(name, value)?;
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(GrrrError::Domain {
            name,
            value,
            domain: "[0, 1]",
        })
    }
}

pub(crate) fn check_open_unit(name: &'static str, value: f64) -> Result<f64> {
    check_finite(name, value)?;
    if value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(GrrrError::Domain {
            name,
            value,
            domain: "(0, 1)",
        })
    }
}
