//! Base anomaly detectors.
//!
//! Every detector turns a series into a per-point score, then shares one
//! labeling path: the score population is standardized, points whose score
//! reaches the threshold are labeled anomalous, and the standardized score is
//! mapped through the normal CDF into a probability and a confidence.
//! Detection is one-sided: only large positive scores are flagged.

mod arma;
mod goldilocks;
mod holt_winters;
pub mod nnls;
mod random;
mod variance;

pub use arma::{
    arma_detector, arma_forecast, arma_residuals, fit_arma, is_stationary, ArmaModel, ArmaParams,
};
pub use goldilocks::{goldilocks_detector, goldilocks_forecasts, GoldilocksParams};
pub use holt_winters::{holt_winters_detector, holt_winters_forecasts, HoltWintersParams, HoltWintersState};
pub use nnls::{nnls, NnlsFit};
pub use random::{random_detector, RANDOM_DETECTOR_CONFIDENCE};
pub use variance::{variance_detector, variance_scores};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normalization::{std_normal_cdf, to_confidence};
use crate::series::{mean_and_std, LabeledSeries};

/// Scores whose spread is below this fraction of the series magnitude are
/// treated as constant.
const DEGENERATE_RELATIVE_SPREAD: f64 = 1e-9;

/// One detector's output at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorVerdict {
    pub anomaly: bool,
    pub raw_score: f64,
    /// Belief that the point is anomalous.
    pub probability: f64,
    /// Belief in the reported label, in `[0.5, 1 - 1e-9]`.
    pub confidence: f64,
}

impl DetectorVerdict {
    /// A normal verdict carrying no evidence either way.
    pub fn uninformative(raw_score: f64) -> Self {
        Self {
            anomaly: false,
            raw_score,
            probability: 0.5,
            confidence: 0.5,
        }
    }
}

/// How the anomaly threshold on a detector's scores is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThresholdPolicy {
    /// `mean + multiplier * sd` of the detector's score population.
    Sigma { multiplier: f64 },
    /// A fixed threshold in raw score units.
    Absolute { epsilon: f64 },
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        Self::Sigma { multiplier: 3.0 }
    }
}

impl ThresholdPolicy {
    pub fn sigma(multiplier: f64) -> Result<Self> {
        if !(multiplier > 0.0 && multiplier.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma multiplier {multiplier} must be positive"
            )));
        }
        Ok(Self::Sigma { multiplier })
    }
}

/// Turns per-point scores into verdicts. `None` marks warm-up points, which
/// are labeled normal with confidence 0.5 and excluded from the population.
/// `magnitude` is the scale of the underlying series, used to decide when
/// the scores are numerically constant.
pub(crate) fn label_scores(
    scores: &[Option<f64>],
    magnitude: f64,
    policy: ThresholdPolicy,
) -> Vec<DetectorVerdict> {
    let population: Vec<f64> = scores.iter().flatten().copied().collect();
    let moments = mean_and_std(&population).ok().filter(|&(_, sd)| {
        sd > DEGENERATE_RELATIVE_SPREAD * magnitude.max(f64::MIN_POSITIVE) && sd.is_finite()
    });
    let Some((mean, sd)) = moments else {
        log::debug!("score population has no spread; emitting uninformative verdicts");
        return scores
            .iter()
            .map(|s| DetectorVerdict::uninformative(s.unwrap_or(0.0)))
            .collect();
    };
    scores
        .iter()
        .map(|s| match *s {
            None => DetectorVerdict::uninformative(0.0),
            Some(raw) => {
                let z = (raw - mean) / sd;
                let anomaly = match policy {
                    ThresholdPolicy::Sigma { multiplier } => z >= multiplier,
                    ThresholdPolicy::Absolute { epsilon } => raw >= epsilon,
                };
                let probability = std_normal_cdf(z).unwrap_or(0.5);
                DetectorVerdict {
                    anomaly,
                    raw_score: raw,
                    probability,
                    confidence: to_confidence(probability, anomaly),
                }
            }
        })
        .collect()
}

pub(crate) fn magnitude(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Which detectors to run and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSuite {
    pub variance: bool,
    pub goldilocks: Option<GoldilocksParams>,
    pub holt_winters: Option<HoltWintersParams>,
    pub arma: Option<ArmaParams>,
    pub policy: ThresholdPolicy,
}

impl Default for DetectorSuite {
    fn default() -> Self {
        Self {
            variance: true,
            goldilocks: Some(GoldilocksParams::default()),
            holt_winters: Some(HoltWintersParams::default()),
            arma: Some(ArmaParams::default()),
            policy: ThresholdPolicy::default(),
        }
    }
}

/// Column names used for each detector in reports.
pub const VARIANCE_NAME: &str = "Var";
pub const GOLDILOCKS_NAME: &str = "Goldi";
pub const HOLT_WINTERS_NAME: &str = "HW";
pub const ARMA_NAME: &str = "ARMA";
pub const RANDOM_NAME: &str = "Random";

/// Verdicts from one detector over one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorRun {
    pub name: String,
    pub verdicts: Vec<DetectorVerdict>,
    /// Set when the detector could not be applied; the verdicts are then
    /// all uninformative.
    pub skipped: Option<String>,
}

impl DetectorRun {
    fn from_result(name: &str, len: usize, result: Result<Vec<DetectorVerdict>>) -> Self {
        match result {
            Ok(verdicts) => Self {
                name: name.into(),
                verdicts,
                skipped: None,
            },
            Err(e) => {
                log::warn!("{name} detector skipped: {e}");
                Self {
                    name: name.into(),
                    verdicts: vec![DetectorVerdict::uninformative(0.0); len],
                    skipped: Some(e.to_string()),
                }
            }
        }
    }
}

/// Runs every enabled detector in the fixed order Var, Goldi, HW, ARMA.
///
/// A detector whose model does not apply to the series contributes
/// uninformative verdicts and records why.
pub fn run_detectors(series: &LabeledSeries, suite: &DetectorSuite) -> Vec<DetectorRun> {
    let n = series.len();
    let mut runs = Vec::new();
    if suite.variance {
        runs.push(DetectorRun::from_result(
            VARIANCE_NAME,
            n,
            variance_detector(series, suite.policy),
        ));
    }
    if let Some(p) = &suite.goldilocks {
        runs.push(DetectorRun::from_result(
            GOLDILOCKS_NAME,
            n,
            goldilocks_detector(series, p, suite.policy),
        ));
    }
    if let Some(p) = &suite.holt_winters {
        runs.push(DetectorRun::from_result(
            HOLT_WINTERS_NAME,
            n,
            holt_winters_detector(series, p, suite.policy),
        ));
    }
    if let Some(p) = &suite.arma {
        runs.push(DetectorRun::from_result(
            ARMA_NAME,
            n,
            arma_detector(series, p, suite.policy),
        ));
    }
    runs
}

/// Assembles detector runs into the combiner's input.
pub fn verdict_matrix(runs: &[DetectorRun]) -> Result<crate::bcc::VerdictMatrix> {
    crate::bcc::VerdictMatrix::from_columns(
        runs.iter()
            .map(|r| {
                (
                    r.name.clone(),
                    r.verdicts.iter().map(|v| v.anomaly).collect(),
                    r.verdicts.iter().map(|v| v.confidence).collect(),
                )
            })
            .collect(),
    )
}
