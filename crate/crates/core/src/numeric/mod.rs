//! Numerical building blocks shared by the estimators and fitters.

pub mod normal;
pub mod optimize;
pub mod quadrature;
pub mod rng;
pub mod special;

pub use normal::{std_normal_cdf, std_normal_pdf, std_normal_quantile};
pub use optimize::{minimize, NelderMead, OptimizerResult};
pub use quadrature::{integrate, AdaptiveQuadrature, QuadratureResult, Tolerance};
pub use rng::{rng_binomial, RngStream};
pub use special::{ln_beta_density, log_beta};
