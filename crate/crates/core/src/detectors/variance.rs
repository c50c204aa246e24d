use super::{label_scores, magnitude, DetectorVerdict, ThresholdPolicy};
use crate::error::{Error, Result};
use crate::series::LabeledSeries;

/// First differences `y_t - y_{t-1}`, with 0 at the first point.
pub fn variance_scores(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    if !values.is_empty() {
        out.push(0.0);
    }
    out.extend(values.windows(2).map(|w| w[1] - w[0]));
    out
}

/// Flags points whose jump from the previous value is unusually large.
pub fn variance_detector(series: &LabeledSeries, policy: ThresholdPolicy) -> Result<Vec<DetectorVerdict>> {
    if series.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "variance detector needs at least 3 points, got {}",
            series.len()
        )));
    }
    let values = series.values();
    let scores: Vec<Option<f64>> = variance_scores(&values).into_iter().map(Some).collect();
    Ok(label_scores(&scores, magnitude(&values), policy))
}
