//! Gaussian scaling of raw detector scores into probabilities, and the
//! predicted-class confidences the combiner consumes.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::series::standardize;

/// Largest confidence a detector may report. Exactly 1 makes the
/// combiner's likelihood degenerate.
pub const CONFIDENCE_CEILING: f64 = 1.0 - 1e-9;

/// Smallest confidence a detector may report in its own prediction.
pub const CONFIDENCE_FLOOR: f64 = 0.5;

/// Probability of anomaly and confidence in the predicted label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedScore {
    pub probability: f64,
    pub confidence: f64,
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite argument {x}")));
    }
    Ok(0.5 * erfc(-x / std::f64::consts::SQRT_2))
}

/// Result of [`gaussian_normalize`].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianScaling {
    pub probabilities: Vec<f64>,
    /// Set when the scores had no spread; every probability is then 0.5.
    pub degenerate: bool,
}

/// Maps each score to `Phi((s - mean) / sd)` over the score population.
pub fn gaussian_normalize(raw_scores: &[f64]) -> Result<GaussianScaling> {
    match standardize(raw_scores) {
        Ok(s) => Ok(GaussianScaling {
            probabilities: s
                .z
                .iter()
                .map(|&z| std_normal_cdf(z))
                .collect::<Result<_>>()?,
            degenerate: false,
        }),
        Err(Error::DegenerateScale(msg)) => {
            log::warn!("gaussian scaling on constant scores: {msg}");
            Ok(GaussianScaling {
                probabilities: vec![0.5; raw_scores.len()],
                degenerate: true,
            })
        }
        Err(e) => Err(e),
    }
}

/// Confidence in `label` given anomaly probability `p`, clamped into
/// `[CONFIDENCE_FLOOR, CONFIDENCE_CEILING]`.
pub fn to_confidence(p: f64, anomaly: bool) -> f64 {
    let z = if anomaly { p } else { 1.0 - p };
    z.clamp(CONFIDENCE_FLOOR, CONFIDENCE_CEILING)
}
