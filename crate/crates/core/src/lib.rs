//! The generalised relative risk reduction (GRRR): a treatment effect for
//! binary outcomes that stays in [−1, 1] whichever outcome is labelled the
//! event.
//!
//! The crate covers the measure itself, within-study variances, the
//! split-lognormal sampling approximation and random-effects pooling.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod measure;
pub mod meta;
pub mod numeric;
pub mod split_lognormal;
pub mod variance;

pub use error::{GrrrError, Result};
pub use measure::{
    baseline_risk, estimate_theta, odds_ratio_to_theta, phi_to_theta, probs_to_phi, q_from_p_theta,
    theta_from_probs, BaselineWeighting, GrrrTheta, ProbabilityPair, StudyTable, ThetaEstimate,
};
pub use meta::{
    beta_reparam, fit_beta_model, fit_direct_dl, fit_direct_ml, fit_split_lognormal_model,
    BetaMoments, FitOptions, MetaFit, MetaMethod, SplitModelOptions,
};
pub use split_lognormal::{Sided, SplitLognormalApprox};
pub use variance::{
    delta_method_params, estimate_study, variance_analytic, variance_bootstrap, variance_exact,
    EstimateOptions, GrrrEstimate, VarianceMethod,
};
