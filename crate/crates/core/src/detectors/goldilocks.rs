//! Windowed non-negative regression forecaster.
//!
//! Each point is predicted from the `window` values before it. Time inside
//! the window is rescaled to `tau = j / window` and the regression uses the
//! basis `[1, tau, -tau]`, so non-negative weights still express falling
//! trends. The prediction is the fitted line evaluated at `tau = 1`.

use serde::{Deserialize, Serialize};

use super::nnls::nnls;
use super::{label_scores, magnitude, DetectorVerdict, ThresholdPolicy};
use crate::error::{Error, Result};
use crate::series::{sliding_windows, LabeledSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GoldilocksParams {
    pub window: usize,
}

impl Default for GoldilocksParams {
    fn default() -> Self {
        Self { window: 30 }
    }
}

fn features(tau: f64) -> Vec<f64> {
    vec![1.0, tau, -tau]
}

/// Forecasts for every point; `None` for the first `window` points.
pub fn goldilocks_forecasts(values: &[f64], params: &GoldilocksParams) -> Result<Vec<Option<f64>>> {
    let n = params.window;
    if n < 3 {
        return Err(Error::InvalidArgument(format!("window {n} must be at least 3")));
    }
    if values.len() < n + 1 {
        return Err(Error::InsufficientData(format!(
            "Goldilocks needs {} points, got {}",
            n + 1,
            values.len()
        )));
    }
    let design: Vec<Vec<f64>> = (0..n).map(|j| features(j as f64 / n as f64)).collect();
    let next = features(1.0);
    let mut out = vec![None; n];
    // the last window has no point after it
    for w in sliding_windows(&values[..values.len() - 1], n)? {
        let fit = nnls(&design, w.values)?;
        out.push(Some(next.iter().zip(&fit.weights).map(|(a, b)| a * b).sum()));
    }
    Ok(out)
}

/// Scores each point by how far it rises above the windowed prediction.
pub fn goldilocks_detector(
    series: &LabeledSeries,
    params: &GoldilocksParams,
    policy: ThresholdPolicy,
) -> Result<Vec<DetectorVerdict>> {
    let values = series.values();
    let forecasts = goldilocks_forecasts(&values, params)?;
    let scores: Vec<Option<f64>> = forecasts
        .iter()
        .zip(&values)
        .map(|(f, &y)| f.map(|f| y - f))
        .collect();
    Ok(label_scores(&scores, magnitude(&values), policy))
}
