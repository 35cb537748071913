//! Lay-audience sentences for a pooled effect.

use grrr_core::MetaFit;

use crate::analysis::pooled_interval;
use crate::error::Result;

fn pct(x: f64) -> i64 {
    (100.0 * x).round() as i64
}

const AVOID: &str =
    "of those who experience the event without treatment would avoid it under treatment";
const GAIN: &str = "of those who do not experience the event without treatment would instead experience it under treatment";

/// Sentence for an estimate `theta` with interval `(lower, upper)`.
pub fn render_summary(theta: f64, (lower, upper): (f64, f64), event_is_harm: bool) -> String {
    let mut text = if theta < 0.0 {
        let mut s = format!("An estimated {}% {AVOID}", pct(-theta));
        if upper <= 0.0 {
            s += &format!(
                "; allowing for uncertainty, this could be between around {}%-{}%.",
                pct(-upper),
                pct(-lower)
            );
        } else {
            s += &format!(
                "; allowing for uncertainty, the data are also consistent with no difference, or with up to around {}% {GAIN}.",
                pct(upper)
            );
        }
        s
    } else if theta > 0.0 {
        let mut s = format!("A further {}% {GAIN}", pct(theta));
        if lower >= 0.0 {
            s += &format!(
                "; allowing for uncertainty, this could be between around {}%-{}%.",
                pct(lower),
                pct(upper)
            );
        } else {
            s += &format!(
                "; allowing for uncertainty, the data are also consistent with no difference, or with up to around {}% {AVOID}.",
                pct(-lower)
            );
        }
        s
    } else {
        format!(
            "There is no estimated difference between treatment and control; allowing for uncertainty, up to around {}% {AVOID}, or up to around {}% {GAIN}.",
            pct(-lower.min(0.0)),
            pct(upper.max(0.0))
        )
    };
    if theta != 0.0 {
        let kind = if event_is_harm {
            "undesirable"
        } else {
            "desirable"
        };
        let side = if (theta < 0.0) == event_is_harm {
            "treatment"
        } else {
            "control"
        };
        text += &format!(" As the event is {kind}, this favours {side}.");
    }
    text
}

pub fn render_plain_language(fit: &MetaFit, alpha: f64, event_is_harm: bool) -> Result<String> {
    Ok(render_summary(
        fit.theta_hat,
        pooled_interval(fit, alpha)?,
        event_is_harm,
    ))
}
