//! Bayesian classifier combination for binary (normal/anomaly) verdicts,
//! together with the majority-vote and Dawid-Skene baselines.

mod baselines;
mod sampler;

pub use baselines::{dawid_skene_em, majority_vote, DawidSkeneResult};
pub use sampler::{
    log_posterior, run_sampler, run_sampler_traced, ChainTrace, ModelState, PosteriorSummary,
    SamplerConfig,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normalization::{CONFIDENCE_CEILING, CONFIDENCE_FLOOR};

/// Labels and confidences for I points from K detectors, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictMatrix {
    n_points: usize,
    names: Vec<String>,
    labels: Vec<bool>,
    confidences: Vec<f64>,
}

impl VerdictMatrix {
    /// Builds a matrix from per-point rows.
    pub fn new(labels: Vec<Vec<bool>>, confidences: Vec<Vec<f64>>, names: Vec<String>) -> Result<Self> {
        let k = names.len();
        if labels.is_empty() || k == 0 {
            return Err(Error::EmptyInput("verdict matrix needs I >= 1 and K >= 1".into()));
        }
        if labels.len() != confidences.len() {
            return Err(Error::Shape(format!(
                "{} label rows but {} confidence rows",
                labels.len(),
                confidences.len()
            )));
        }
        if let Some(i) = (0..labels.len()).find(|&i| labels[i].len() != k || confidences[i].len() != k) {
            return Err(Error::Shape(format!("row {i} does not have {k} entries")));
        }
        let n_points = labels.len();
        let m = Self {
            n_points,
            names,
            labels: labels.into_iter().flatten().collect(),
            confidences: confidences.into_iter().flatten().collect(),
        };
        m.check_confidences()?;
        Ok(m)
    }

    /// Builds a matrix from per-detector columns.
    pub fn from_columns(columns: Vec<(String, Vec<bool>, Vec<f64>)>) -> Result<Self> {
        let n = columns.first().map(|c| c.1.len()).unwrap_or(0);
        if let Some(c) = columns.iter().find(|c| c.1.len() != n || c.2.len() != n) {
            return Err(Error::Shape(format!("column {} has the wrong length", c.0)));
        }
        let names = columns.iter().map(|c| c.0.clone()).collect();
        let labels = (0..n).map(|i| columns.iter().map(|c| c.1[i]).collect()).collect();
        let conf = (0..n).map(|i| columns.iter().map(|c| c.2[i]).collect()).collect();
        Self::new(labels, conf, names)
    }

    fn check_confidences(&self) -> Result<()> {
        match self
            .confidences
            .iter()
            .position(|z| !(CONFIDENCE_FLOOR..=CONFIDENCE_CEILING).contains(z))
        {
            Some(pos) => Err(Error::InvalidArgument(format!(
                "confidence {} at point {}, detector {} outside [0.5, 1 - 1e-9]",
                self.confidences[pos],
                pos / self.names.len(),
                pos % self.names.len()
            ))),
            None => Ok(()),
        }
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_detectors(&self) -> usize {
        self.names.len()
    }

    pub fn detector_names(&self) -> &[String] {
        &self.names
    }

    /// `true` when detector k flagged point i as anomalous.
    pub fn label(&self, i: usize, k: usize) -> bool {
        self.labels[i * self.names.len() + k]
    }

    pub fn confidence(&self, i: usize, k: usize) -> f64 {
        self.confidences[i * self.names.len() + k]
    }

    pub fn row_labels(&self, i: usize) -> &[bool] {
        let k = self.names.len();
        &self.labels[i * k..(i + 1) * k]
    }

    pub fn row_confidences(&self, i: usize) -> &[f64] {
        let k = self.names.len();
        &self.confidences[i * k..(i + 1) * k]
    }

    pub fn column_labels(&self, k: usize) -> Vec<bool> {
        (0..self.n_points).map(|i| self.label(i, k)).collect()
    }

    /// A copy with one more detector column on the right.
    pub fn with_detector(&self, name: impl Into<String>, labels: &[bool], confidences: &[f64]) -> Result<Self> {
        if labels.len() != self.n_points || confidences.len() != self.n_points {
            return Err(Error::Shape("appended column has the wrong length".into()));
        }
        let k = self.names.len();
        let mut out_labels = Vec::with_capacity(self.n_points * (k + 1));
        let mut out_conf = Vec::with_capacity(self.n_points * (k + 1));
        for i in 0..self.n_points {
            out_labels.extend_from_slice(self.row_labels(i));
            out_labels.push(labels[i]);
            out_conf.extend_from_slice(self.row_confidences(i));
            out_conf.push(confidences[i]);
        }
        let mut names = self.names.clone();
        names.push(name.into());
        let m = Self {
            n_points: self.n_points,
            names,
            labels: out_labels,
            confidences: out_conf,
        };
        m.check_confidences()?;
        Ok(m)
    }

    /// The matrix with every label flipped (classes relabeled 0 <-> 1).
    pub fn flipped(&self) -> Self {
        Self {
            labels: self.labels.iter().map(|l| !l).collect(),
            ..self.clone()
        }
    }
}

/// Elicits priors from the verdicts and runs the sampler on them.
pub fn bayes_combine(
    verdicts: &VerdictMatrix,
    shrinkage: f64,
    config: &SamplerConfig,
) -> Result<PosteriorSummary> {
    let priors = crate::priors::elicit_priors(verdicts, shrinkage)?;
    run_sampler(verdicts, &priors, config)
}

/// Labels points anomalous iff `p_anomaly > cutoff`.
pub fn classify(summary: &PosteriorSummary, cutoff: f64) -> Vec<bool> {
    summary.p_anomaly.iter().map(|&p| p > cutoff).collect()
}
