//! Poisson-binomial tail probabilities and moment-matched Beta priors.
//!
//! Each detector reports a confidence `z` in its own prediction. Treating
//! the detectors as independent Bernoulli trials, the number that are correct
//! follows a Poisson-binomial law; its upper tail `Z` is the chance that a
//! majority is right. `Z` drives point estimates of the confusion diagonals
//! and of the per-point anomaly label, and those estimates are turned into
//! Beta hyperparameters by matching the first two moments.

use serde::{Deserialize, Serialize};

use crate::bcc::VerdictMatrix;
use crate::error::{Error, Result};

/// Default shrinkage applied to elicited variances.
pub const DEFAULT_SHRINKAGE: f64 = 0.9;

/// Interior clamp for elicited prior means.
const MEAN_EPS: f64 = 1e-9;

/// Variances below this fraction of `m(1 - m)` are rounding noise.
const DEGENERATE_VARIANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "Beta parameters must be positive, got ({alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn uniform() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }

    /// Normalized log density; `-inf` outside the open unit interval.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        use statrs::function::gamma::ln_gamma;
        if !(x > 0.0 && x < 1.0) {
            return f64::NEG_INFINITY;
        }
        let ln_norm = ln_gamma(self.alpha + self.beta) - ln_gamma(self.alpha) - ln_gamma(self.beta);
        ln_norm + (self.alpha - 1.0) * x.ln() + (self.beta - 1.0) * (-x).ln_1p()
    }

    /// The same distribution reflected about 1/2.
    pub fn swapped(&self) -> Self {
        Self {
            alpha: self.beta,
            beta: self.alpha,
        }
    }
}

/// Per-detector confidences at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceVector(Vec<f64>);

impl ConfidenceVector {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if z.is_empty() {
            return Err(Error::EmptyInput("confidence vector is empty".into()));
        }
        if let Some(bad) = z.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "confidence {bad} outside [0, 1]"
            )));
        }
        Ok(Self(z))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Hyperparameters for every confusion diagonal and every per-point label rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSet {
    /// `confusion[k][j]` is the prior on detector k's diagonal entry for class j.
    pub confusion: Vec<[BetaParams; 2]>,
    /// `label[i]` is the prior on point i's anomaly rate.
    pub label: Vec<BetaParams>,
}

impl PriorSet {
    /// Beta(1,1) everywhere.
    pub fn uniform(points: usize, detectors: usize) -> Self {
        Self {
            confusion: vec![[BetaParams::uniform(); 2]; detectors],
            label: vec![BetaParams::uniform(); points],
        }
    }

    pub fn n_detectors(&self) -> usize {
        self.confusion.len()
    }

    pub fn n_points(&self) -> usize {
        self.label.len()
    }
}

/// PMF of the number of successes among independent Bernoulli(z_k) trials.
///
/// Built by convolving in one trial at a time, O(K^2).
pub fn poisson_binomial_pmf(z: &ConfidenceVector) -> Vec<f64> {
    let z = z.as_slice();
    let mut pmf = Vec::with_capacity(z.len() + 1);
    pmf.push(1.0);
    for &p in z {
        pmf.push(0.0);
        for w in (1..pmf.len()).rev() {
            pmf[w] = pmf[w] * (1.0 - p) + pmf[w - 1] * p;
        }
        pmf[0] *= 1.0 - p;
    }
    pmf
}

/// `P(W > floor(K/2))`: the probability that a strict majority is correct.
pub fn majority_probability(z: &ConfidenceVector) -> f64 {
    let pmf = poisson_binomial_pmf(z);
    let half = z.len() / 2;
    pmf[half + 1..].iter().sum::<f64>().clamp(0.0, 1.0)
}

/// Point estimate of a confusion-diagonal entry at one point.
pub fn estimate_pi_hat(majority: f64, confidence: f64) -> f64 {
    majority * confidence
}

/// Point estimate of the true label: anomalous iff `Z > 0.5`.
pub fn estimate_t_hat(majority: f64) -> bool {
    majority > 0.5
}

/// The Beta distribution with the given mean and variance.
pub fn beta_from_moments(mean: f64, variance: f64) -> Result<BetaParams> {
    if !(mean > 0.0 && mean < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "mean {mean} must lie in (0, 1)"
        )));
    }
    let bound = mean * (1.0 - mean);
    if !(variance > 0.0 && variance < bound) {
        return Err(Error::InfeasibleVariance {
            mean,
            variance,
            bound,
        });
    }
    let concentration = bound / variance - 1.0;
    BetaParams::new(mean * concentration, (1.0 - mean) * concentration)
}

/// Confidences reflected so every entry is a belief in "anomaly".
fn anomaly_beliefs(verdicts: &VerdictMatrix, i: usize) -> Vec<f64> {
    (0..verdicts.n_detectors())
        .map(|k| {
            let z = verdicts.confidence(i, k);
            if verdicts.label(i, k) {
                z
            } else {
                1.0 - z
            }
        })
        .collect()
}

/// Probability that a strict majority of detectors flags point `i`, using
/// each detector's confidence as its probability of voting "anomaly" the way
/// it did.
pub fn directional_majority(verdicts: &VerdictMatrix, i: usize) -> f64 {
    let beliefs = ConfidenceVector(anomaly_beliefs(verdicts, i));
    majority_probability(&beliefs)
}

fn sample_moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Moment-matched Beta with the variance shrunk by `shrinkage` and kept
/// strictly below the Bernoulli bound. Degenerate populations (spread at
/// rounding level) fall back to the widest admissible variance.
fn shrunk_beta(mean: f64, variance: f64, shrinkage: f64) -> BetaParams {
    let m = mean.clamp(MEAN_EPS, 1.0 - MEAN_EPS);
    let ceiling = shrinkage * m * (1.0 - m);
    let v = shrinkage * variance;
    let v = if v > DEGENERATE_VARIANCE * m * (1.0 - m) && v < ceiling {
        v
    } else {
        ceiling
    };
    beta_from_moments(m, v).unwrap_or_else(|_| BetaParams::uniform())
}

/// Elicits every hyperparameter from the verdicts alone.
///
/// Confusion priors: for detector k and class j, the population
/// `{Z_i * z_ik : c_ik = j}` is moment-matched after shrinking its sample
/// variance by `shrinkage`. Label priors: mean `Z'_i` from
/// [`directional_majority`] and variance `shrinkage * Z'_i (1 - Z'_i)`.
pub fn elicit_priors(verdicts: &VerdictMatrix, shrinkage: f64) -> Result<PriorSet> {
    if !(shrinkage > 0.0 && shrinkage < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "shrinkage {shrinkage} must lie in (0, 1)"
        )));
    }
    let (n, k_count) = (verdicts.n_points(), verdicts.n_detectors());
    if n < 2 {
        return Err(Error::InsufficientData(
            "prior elicitation needs at least two points".into(),
        ));
    }

    let majority: Vec<f64> = (0..n)
        .map(|i| majority_probability(&ConfidenceVector(verdicts.row_confidences(i).to_vec())))
        .collect();

    let mut confusion = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let mut pops: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for (i, &zmaj) in majority.iter().enumerate() {
            let class = verdicts.label(i, k) as usize;
            pops[class].push(estimate_pi_hat(zmaj, verdicts.confidence(i, k)));
        }
        let entry = [0, 1].map(|j| {
            if pops[j].is_empty() {
                log::warn!(
                    "detector {} never output class {j}; using Beta(1,1) for that diagonal",
                    verdicts.detector_names()[k]
                );
                BetaParams::uniform()
            } else {
                let (m, v) = sample_moments(&pops[j]);
                shrunk_beta(m, v, shrinkage)
            }
        });
        confusion.push(entry);
    }

    let label = (0..n)
        .map(|i| {
            let m = directional_majority(verdicts, i);
            let m = m.clamp(MEAN_EPS, 1.0 - MEAN_EPS);
            shrunk_beta(m, m * (1.0 - m), shrinkage)
        })
        .collect();

    Ok(PriorSet { confusion, label })
}
