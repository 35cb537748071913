//! The generalised relative risk reduction (GRRR) and its conversions.
//!
//! For control and treatment event probabilities `p` and `q`, the effect
//! `θ ∈ [-1, 1]` is `q/p - 1` when `q < p` (relative risk minus one) and
//! `1 - (1-q)/(1-p)` when `q ≥ p` (one minus the relative risk of a non-event).
//! Equivalently `q = (1+θ)p` for negative θ and `q = p + θ(1-p)` otherwise.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_open_unit, check_probability, GrrrError, Result};

/// One parallel-arm 2×2 table of event counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyTable {
    pub study_id: String,
    pub events_control: u64,
    pub n_control: u64,
    pub events_treatment: u64,
    pub n_treatment: u64,
}

impl StudyTable {
    pub fn new(
        study_id: impl Into<String>,
        events_control: u64,
        n_control: u64,
        events_treatment: u64,
        n_treatment: u64,
    ) -> Result<Self> {
        let table = Self {
            study_id: study_id.into(),
            events_control,
            n_control,
            events_treatment,
            n_treatment,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| {
            Err(GrrrError::InvalidTable {
                study_id: self.study_id.clone(),
                reason,
            })
        };
        if self.n_control == 0 || self.n_treatment == 0 {
            return fail("each arm needs at least one participant".into());
        }
        if self.events_control > self.n_control {
            return fail(format!(
                "control events {} exceed arm size {}",
                self.events_control, self.n_control
            ));
        }
        if self.events_treatment > self.n_treatment {
            return fail(format!(
                "treatment events {} exceed arm size {}",
                self.events_treatment, self.n_treatment
            ));
        }
        Ok(())
    }

    pub fn p_hat(&self) -> f64 {
        self.events_control as f64 / self.n_control as f64
    }

    pub fn q_hat(&self) -> f64 {
        self.events_treatment as f64 / self.n_treatment as f64
    }

    /// Both observed proportions are 0, or both are 1.
    pub fn is_double_degenerate(&self) -> bool {
        (self.events_control == 0 && self.events_treatment == 0)
            || (self.events_control == self.n_control && self.events_treatment == self.n_treatment)
    }

    /// Some observed proportion is 0 or 1.
    pub fn has_boundary_proportion(&self) -> bool {
        self.events_control == 0
            || self.events_treatment == 0
            || self.events_control == self.n_control
            || self.events_treatment == self.n_treatment
    }

    /// Same table with events and non-events exchanged in both arms.
    pub fn label_flipped(&self) -> Self {
        Self {
            study_id: self.study_id.clone(),
            events_control: self.n_control - self.events_control,
            n_control: self.n_control,
            events_treatment: self.n_treatment - self.events_treatment,
            n_treatment: self.n_treatment,
        }
    }

    /// Proportions after adding `correction` to all four cells.
    pub fn corrected_proportions(&self, correction: f64) -> (f64, f64) {
        (
            (self.events_control as f64 + correction) / (self.n_control as f64 + 2.0 * correction),
            (self.events_treatment as f64 + correction)
                / (self.n_treatment as f64 + 2.0 * correction),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityPair {
    pub p: f64,
    pub q: f64,
}

impl ProbabilityPair {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        Ok(Self {
            p: check_probability("p", p)?,
            q: check_probability("q", q)?,
        })
    }
}

/// A GRRR value in [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GrrrTheta(f64);

impl GrrrTheta {
    pub const ZERO: GrrrTheta = GrrrTheta(0.0);

    pub fn new(theta: f64) -> Result<Self> {
        check_finite("theta", theta)?;
        if !(-1.0..=1.0).contains(&theta) {
            return Err(GrrrError::Domain {
                name: "theta",
                value: theta,
                domain: "[-1, 1]",
            });
        }
        Ok(Self(theta))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<GrrrTheta> for f64 {
    fn from(t: GrrrTheta) -> f64 {
        t.0
    }
}

pub fn theta_from_probs(pair: ProbabilityPair) -> GrrrTheta {
    let ProbabilityPair { p, q } = pair;
    let theta = if q < p {
        (q - p) / p
    } else if q > p {
        (q - p) / (1.0 - p)
    } else {
        0.0
    };
    GrrrTheta(theta.clamp(-1.0, 1.0))
}

/// Treatment event probability implied by a control probability and θ.
pub fn q_from_p_theta(p: f64, theta: GrrrTheta) -> Result<f64> {
    let p = check_probability("p", p)?;
    let t = theta.value();
    let q = if t < 0.0 {
        (1.0 + t) * p
    } else {
        p + t * (1.0 - p)
    };
    Ok(q.clamp(0.0, 1.0))
}

/// θ for event counts `i/n1` (control) and `j/n2` (treatment). The branch
/// is chosen by exact integer comparison and the value is formed with a
/// single rounding.
pub(crate) fn theta_from_counts(i: u64, n1: u64, j: u64, n2: u64) -> f64 {
    let lhs = j as i128 * n1 as i128;
    let rhs = i as i128 * n2 as i128;
    match lhs.cmp(&rhs) {
        std::cmp::Ordering::Less => (lhs - rhs) as f64 / rhs as f64,
        std::cmp::Ordering::Equal => 0.0,
        std::cmp::Ordering::Greater => (lhs - rhs) as f64 / (n2 as i128 * (n1 - i) as i128) as f64,
    }
}

/// θ̂ after adding `c` to every cell, from cross-products of the corrected
/// counts. With a dyadic `c` such as 0.5 the products are exact, so a
/// label-flipped table gives exactly the negated value.
pub(crate) fn theta_from_corrected_counts(i: u64, n1: u64, j: u64, n2: u64, c: f64) -> f64 {
    let (m1, m2) = (n1 as f64 + 2.0 * c, n2 as f64 + 2.0 * c);
    let lhs = (j as f64 + c) * m1;
    let rhs = (i as f64 + c) * m2;
    if lhs < rhs {
        (lhs - rhs) / rhs
    } else if lhs > rhs {
        (lhs - rhs) / (m2 * ((n1 - i) as f64 + c))
    } else {
        0.0
    }
}

impl StudyTable {
    /// θ̂ after adding `c` to every cell.
    pub fn corrected_theta(&self, c: f64) -> f64 {
        theta_from_corrected_counts(
            self.events_control,
            self.n_control,
            self.events_treatment,
            self.n_treatment,
            c,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate {
    pub theta: GrrrTheta,
    /// Both proportions 0 or both 1; θ̂ is 0 and carries no information.
    pub degenerate: bool,
}

/// θ̂ from observed proportions, with no continuity correction.
pub fn estimate_theta(table: &StudyTable) -> ThetaEstimate {
    let theta = theta_from_counts(
        table.events_control,
        table.n_control,
        table.events_treatment,
        table.n_treatment,
    );
    ThetaEstimate {
        theta: GrrrTheta(theta),
        degenerate: table.is_double_degenerate(),
    }
}

/// φ = (OR - 1)/(OR + 1) = (q - p)/(p + q - 2pq).
pub fn probs_to_phi(pair: ProbabilityPair) -> Result<f64> {
    let ProbabilityPair { p, q } = pair;
    if p == q {
        return Ok(0.0);
    }
    let denom = p + q - 2.0 * p * q;
    if denom <= 0.0 {
        return Err(GrrrError::Domain {
            name: "p + q - 2pq",
            value: denom,
            domain: "(0, inf)",
        });
    }
    Ok(((q - p) / denom).clamp(-1.0, 1.0))
}

pub fn odds_ratio_to_phi(or_value: f64) -> Result<f64> {
    check_finite("odds ratio", or_value)?;
    if or_value <= 0.0 {
        return Err(GrrrError::Domain {
            name: "odds ratio",
            value: or_value,
            domain: "(0, inf)",
        });
    }
    Ok((or_value - 1.0) / (or_value + 1.0))
}

/// Converts φ to θ at a baseline control risk by eliminating q.
pub fn phi_to_theta(phi: f64, baseline_p: f64) -> Result<GrrrTheta> {
    check_finite("phi", phi)?;
    if phi <= -1.0 || phi >= 1.0 {
        return Err(GrrrError::Domain {
            name: "phi",
            value: phi,
            domain: "(-1, 1)",
        });
    }
    let p = check_open_unit("baseline risk", baseline_p)?;
    let denom = 1.0 - phi + 2.0 * p * phi;
    if denom <= 0.0 {
        return Err(GrrrError::Domain {
            name: "1 - phi + 2 p phi",
            value: denom,
            domain: "(0, inf)",
        });
    }
    let theta = if phi < 0.0 {
        2.0 * (1.0 - p) * phi / denom
    } else {
        2.0 * p * phi / denom
    };
    GrrrTheta::new(theta)
}

pub fn odds_ratio_to_theta(or_value: f64, baseline_p: f64) -> Result<GrrrTheta> {
    phi_to_theta(odds_ratio_to_phi(or_value)?, baseline_p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineWeighting {
    /// Mean of the per-study control proportions.
    Unweighted,
    /// Pooled control proportion, i.e. weighted by control arm size.
    Weighted,
}

/// Representative control-arm risk across studies for conversions.
pub fn baseline_risk(tables: &[StudyTable], weighting: BaselineWeighting) -> Result<f64> {
    if tables.is_empty() {
        return Err(GrrrError::TooFewStudies { needed: 1, got: 0 });
    }
    let p = match weighting {
        BaselineWeighting::Unweighted => {
            tables.iter().map(StudyTable::p_hat).sum::<f64>() / tables.len() as f64
        }
        BaselineWeighting::Weighted => {
            let events: u64 = tables.iter().map(|t| t.events_control).sum();
            let total: u64 = tables.iter().map(|t| t.n_control).sum();
            events as f64 / total as f64
        }
    };
    Ok(p)
}
