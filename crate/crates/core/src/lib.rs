//! Unsupervised time-series anomaly detection with a Bayesian ensemble.
//!
//! Base detectors label each point and attach a confidence. Their verdicts
//! are combined by a Bayesian classifier-combination model whose per-detector
//! confusion priors are elicited from the detectors' own agreement, and whose
//! posterior is explored by Metropolis-within-Gibbs sampling.

pub mod bcc;
pub mod detectors;
pub mod error;
pub mod evaluation;
pub mod normalization;
pub mod priors;
pub mod series;

pub use bcc::{
    bayes_combine, classify, dawid_skene_em, majority_vote, run_sampler, PosteriorSummary,
    SamplerConfig, VerdictMatrix,
};
pub use detectors::{run_detectors, verdict_matrix, DetectorRun, DetectorSuite, DetectorVerdict, ThresholdPolicy};
pub use error::{Error, Result};
pub use evaluation::{confusion, error_rate, ConfusionCounts, MetricsReport, SyntheticSpec};
pub use priors::{elicit_priors, BetaParams, PriorSet};
pub use series::{load_series, LabeledSeries, SeriesFormat, TimePoint};
