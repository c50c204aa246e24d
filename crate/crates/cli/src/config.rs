use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use bayescombine::detectors::{ArmaParams, GoldilocksParams, HoltWintersParams};
use bayescombine::priors::DEFAULT_SHRINKAGE;
use bayescombine::{DetectorSuite, SamplerConfig, ThresholdPolicy};
use serde::{Deserialize, Serialize};

/// Everything a run needs, loaded from a TOML file. Every field has a
/// default, so an empty file is a valid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Paths or glob patterns of Yahoo-S5-layout CSV files.
    pub inputs: Vec<String>,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Fraction of the empirical variance kept when eliciting Beta priors.
    pub shrinkage: f64,
    /// Write each series' retained confusion draws to `<id>.chain.csv`.
    pub dump_chain: bool,
    pub detectors: DetectorsConfig,
    pub sampler: SamplerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            output_dir: PathBuf::from("out"),
            seed: 0,
            shrinkage: DEFAULT_SHRINKAGE,
            dump_chain: false,
            detectors: DetectorsConfig::default(),
            sampler: SamplerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorsConfig {
    /// Scores at least this many standard deviations above their mean are anomalies.
    pub sigma_multiplier: f64,
    pub variance: Toggle,
    pub goldilocks: GoldilocksConfig,
    pub holt_winters: HoltWintersConfig,
    pub arma: ArmaConfig,
}

impl Default for DetectorsConfig {
    fn default() -> Self {
        Self {
            sigma_multiplier: 3.0,
            variance: Toggle::default(),
            goldilocks: GoldilocksConfig::default(),
            holt_winters: HoltWintersConfig::default(),
            arma: ArmaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Toggle {
    pub enabled: bool,
}

impl Default for Toggle {
    fn default() -> Self {
        Self { enabled: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GoldilocksConfig {
    pub enabled: bool,
    pub window: usize,
}

impl Default for GoldilocksConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            window: GoldilocksParams::default().window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoltWintersConfig {
    pub enabled: bool,
    pub season_length: usize,
    pub level_weight: f64,
    pub trend_weight: f64,
    pub seasonal_weight: f64,
}

impl Default for HoltWintersConfig {
    fn default() -> Self {
        let p = HoltWintersParams::default();
        Self {
            enabled: true,
            season_length: p.season_length,
            level_weight: p.level_weight,
            trend_weight: p.trend_weight,
            seasonal_weight: p.seasonal_weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmaConfig {
    pub enabled: bool,
    pub p: usize,
    pub q: usize,
    pub max_iterations: usize,
}

impl Default for ArmaConfig {
    fn default() -> Self {
        let a = ArmaParams::default();
        Self {
            enabled: true,
            p: a.p,
            q: a.q,
            max_iterations: a.max_iterations,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let d = &self.detectors;
        if !(d.variance.enabled || d.goldilocks.enabled || d.holt_winters.enabled || d.arma.enabled) {
            bail!("at least one detector must be enabled");
        }
        if !(self.shrinkage > 0.0 && self.shrinkage < 1.0) {
            bail!("shrinkage {} must lie in (0, 1)", self.shrinkage);
        }
        ThresholdPolicy::sigma(d.sigma_multiplier)?;
        self.sampler.validate()?;
        Ok(())
    }

    pub fn suite(&self) -> anyhow::Result<DetectorSuite> {
        let d = &self.detectors;
        Ok(DetectorSuite {
            variance: d.variance.enabled,
            goldilocks: d.goldilocks.enabled.then_some(GoldilocksParams {
                window: d.goldilocks.window,
            }),
            holt_winters: d.holt_winters.enabled.then_some(HoltWintersParams {
                season_length: d.holt_winters.season_length,
                level_weight: d.holt_winters.level_weight,
                trend_weight: d.holt_winters.trend_weight,
                seasonal_weight: d.holt_winters.seasonal_weight,
            }),
            arma: d.arma.enabled.then_some(ArmaParams {
                p: d.arma.p,
                q: d.arma.q,
                max_iterations: d.arma.max_iterations,
            }),
            policy: ThresholdPolicy::sigma(d.sigma_multiplier)?,
        })
    }
}
