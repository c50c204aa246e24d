//! Multiplicative Holt-Winters (level, trend, seasonal index) forecasting.

use serde::{Deserialize, Serialize};

use super::{label_scores, magnitude, DetectorVerdict, ThresholdPolicy};
use crate::error::{Error, Result};
use crate::series::LabeledSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HoltWintersParams {
    pub season_length: usize,
    pub level_weight: f64,
    pub trend_weight: f64,
    pub seasonal_weight: f64,
}

impl Default for HoltWintersParams {
    fn default() -> Self {
        Self {
            season_length: 24,
            level_weight: 0.2,
            trend_weight: 0.05,
            seasonal_weight: 0.1,
        }
    }
}

impl HoltWintersParams {
    fn validate(&self) -> Result<()> {
        if self.season_length == 0 {
            return Err(Error::InvalidArgument("season length must be positive".into()));
        }
        for (name, w) in [
            ("level", self.level_weight),
            ("trend", self.trend_weight),
            ("seasonal", self.seasonal_weight),
        ] {
            if !(w > 0.0 && w < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} weight {w} must lie in (0, 1)"
                )));
            }
        }
        Ok(())
    }
}

/// Smoothed components after processing some prefix of a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoltWintersState {
    pub level: f64,
    pub trend: f64,
    /// Seasonal index for each slot `t mod L`.
    pub seasonal: Vec<f64>,
    pub params: HoltWintersParams,
}

impl HoltWintersState {
    /// Initializes from the first two seasons: level is the mean of season
    /// one, trend the per-step change between season means, and each
    /// seasonal index the ratio of a season-one value to the level.
    pub fn initialize(values: &[f64], params: &HoltWintersParams) -> Result<Self> {
        params.validate()?;
        let l = params.season_length;
        if values.len() < 2 * l {
            return Err(Error::InsufficientData(format!(
                "Holt-Winters needs two seasons ({} points), got {}",
                2 * l,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|&&v| v <= 0.0) {
            return Err(Error::ModelInapplicable(format!(
                "multiplicative Holt-Winters needs positive values, found {bad}"
            )));
        }
        let first = values[..l].iter().sum::<f64>() / l as f64;
        let second = values[l..2 * l].iter().sum::<f64>() / l as f64;
        Ok(Self {
            level: first,
            trend: (second - first) / l as f64,
            seasonal: values[..l].iter().map(|v| v / first).collect(),
            params: params.clone(),
        })
    }

    /// One-step-ahead forecast for time `t`.
    pub fn forecast(&self, t: usize) -> f64 {
        (self.level + self.trend) * self.seasonal[t % self.params.season_length]
    }

    /// Absorbs the observation at time `t`.
    pub fn update(&mut self, t: usize, y: f64) -> Result<()> {
        let p = &self.params;
        let slot = t % p.season_length;
        let old_season = self.seasonal[slot];
        let level = p.level_weight * (y / old_season) + (1.0 - p.level_weight) * (self.level + self.trend);
        if !(level > 0.0) {
            return Err(Error::ModelInapplicable(format!(
                "Holt-Winters level became nonpositive at t = {t}"
            )));
        }
        self.trend = p.trend_weight * (level - self.level) + (1.0 - p.trend_weight) * self.trend;
        self.seasonal[slot] = p.seasonal_weight * (y / level) + (1.0 - p.seasonal_weight) * old_season;
        self.level = level;
        Ok(())
    }
}

/// One-step-ahead forecasts; `None` for the first season.
pub fn holt_winters_forecasts(values: &[f64], params: &HoltWintersParams) -> Result<Vec<Option<f64>>> {
    let mut state = HoltWintersState::initialize(values, params)?;
    let l = params.season_length;
    let mut out = vec![None; l];
    for (t, &y) in values.iter().enumerate().skip(l) {
        out.push(Some(state.forecast(t)));
        state.update(t, y)?;
    }
    Ok(out)
}

/// Scores each point by how far it rises above the Holt-Winters forecast.
pub fn holt_winters_detector(
    series: &LabeledSeries,
    params: &HoltWintersParams,
    policy: ThresholdPolicy,
) -> Result<Vec<DetectorVerdict>> {
    let values = series.values();
    let forecasts = holt_winters_forecasts(&values, params)?;
    let scores: Vec<Option<f64>> = forecasts
        .iter()
        .zip(&values)
        .map(|(f, &y)| f.map(|f| y - f))
        .collect();
    Ok(label_scores(&scores, magnitude(&values), policy))
}
