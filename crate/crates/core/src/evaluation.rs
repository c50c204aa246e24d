//! Confusion counts, error rates, the synthetic benchmark generator and the
//! random-detector robustness experiment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::AddAssign;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bcc::{bayes_combine, classify, majority_vote, SamplerConfig, VerdictMatrix};
use crate::detectors::{random_detector, RANDOM_NAME};
use crate::error::{Error, Result};
use crate::normalization::{CONFIDENCE_CEILING, CONFIDENCE_FLOOR};

pub const MAJORITY_VOTE_NAME: &str = "MajVote";
pub const BAYES_NAME: &str = "Bayes";

/// Counts with anomaly as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, other: Self) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

pub fn confusion(predicted: &[bool], truth: &[bool]) -> Result<ConfusionCounts> {
    if predicted.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} truth labels",
            predicted.len(),
            truth.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// `(fp + fn) / total`.
pub fn error_rate(counts: &ConfusionCounts) -> Result<f64> {
    match counts.total() {
        0 => Err(Error::EmptyInput("no evaluated points".into())),
        n => Ok((counts.fp + counts.fn_) as f64 / n as f64),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub method: String,
    pub counts: ConfusionCounts,
    pub error_rate: f64,
}

impl MethodMetrics {
    pub fn new(method: impl Into<String>, counts: ConfusionCounts) -> Result<Self> {
        Ok(Self {
            method: method.into(),
            error_rate: error_rate(&counts)?,
            counts,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub datasets: Vec<String>,
    pub methods: Vec<MethodMetrics>,
    /// Settings the report was produced with, as given by the caller.
    pub config: BTreeMap<String, String>,
}

impl MetricsReport {
    pub fn method(&self, name: &str) -> Option<&MethodMetrics> {
        self.methods.iter().find(|m| m.method == name)
    }

    /// Fixed-width table with one column per method and rows
    /// False Neg / True Neg / False Pos / True Pos / Error rate.
    pub fn to_table(&self) -> String {
        let width = self
            .methods
            .iter()
            .map(|m| m.method.len())
            .chain([10])
            .max()
            .unwrap_or(10);
        let mut out = format!("{:<12}", "");
        for m in &self.methods {
            let _ = write!(out, " {:>width$}", m.method);
        }
        out.push('\n');
        let rows: [(&str, fn(&ConfusionCounts) -> u64); 4] = [
            ("False Neg", |c| c.fn_),
            ("True Neg", |c| c.tn),
            ("False Pos", |c| c.fp),
            ("True Pos", |c| c.tp),
        ];
        for (label, get) in rows {
            let _ = write!(out, "{label:<12}");
            for m in &self.methods {
                let _ = write!(out, " {:>width$}", get(&m.counts));
            }
            out.push('\n');
        }
        let _ = write!(out, "{:<12}", "Error rate");
        for m in &self.methods {
            let _ = write!(out, " {:>width$.4}", m.error_rate);
        }
        out.push('\n');
        out
    }
}

/// Parameters of a synthetic verdict matrix drawn from the generative
/// model: i.i.d. truth at `anomaly_rate`, and detector k reporting the true
/// class j with probability `diagonals[k][j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub points: usize,
    pub anomaly_rate: f64,
    pub diagonals: Vec<[f64; 2]>,
    pub seed: u64,
    #[serde(default)]
    pub names: Option<Vec<String>>,
}

impl SyntheticSpec {
    /// Detectors with equal accuracy on both classes.
    pub fn symmetric(points: usize, anomaly_rate: f64, accuracies: &[f64], seed: u64) -> Self {
        Self {
            points,
            anomaly_rate,
            diagonals: accuracies.iter().map(|&a| [a, a]).collect(),
            seed,
            names: None,
        }
    }

    /// Collects every problem with the spec rather than stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.points == 0 {
            problems.push("points must be positive".to_string());
        }
        if !(self.anomaly_rate > 0.0 && self.anomaly_rate < 1.0) {
            problems.push(format!("anomaly_rate {} must lie in (0, 1)", self.anomaly_rate));
        }
        if self.diagonals.is_empty() {
            problems.push("diagonals must list at least one detector".to_string());
        }
        for (k, d) in self.diagonals.iter().enumerate() {
            if d.iter().any(|p| !(0.0..=1.0).contains(p)) {
                problems.push(format!("diagonals[{k}] = {d:?} must lie in [0, 1]"));
            }
        }
        if let Some(names) = &self.names {
            if names.len() != self.diagonals.len() {
                problems.push(format!(
                    "{} names for {} detectors",
                    names.len(),
                    self.diagonals.len()
                ));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(problems.join("; ")))
        }
    }

    pub fn detector_names(&self) -> Vec<String> {
        self.names
            .clone()
            .unwrap_or_else(|| (0..self.diagonals.len()).map(|k| format!("D{}", k + 1)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticData {
    pub verdicts: VerdictMatrix,
    pub truth: Vec<bool>,
}

/// Draws a verdict matrix and its truth labels. Each detector's confidence
/// is its true probability of being right about the class it reported,
/// clamped to the valid confidence range.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k_count = spec.diagonals.len();
    let mut truth = Vec::with_capacity(spec.points);
    let mut labels = Vec::with_capacity(spec.points);
    let mut conf = Vec::with_capacity(spec.points);
    for _ in 0..spec.points {
        let t = rng.random_bool(spec.anomaly_rate);
        let mut row_l = Vec::with_capacity(k_count);
        let mut row_z = Vec::with_capacity(k_count);
        for d in &spec.diagonals {
            let correct = rng.random_bool(d[t as usize]);
            let c = if correct { t } else { !t };
            row_l.push(c);
            row_z.push(d[c as usize].clamp(CONFIDENCE_FLOOR, CONFIDENCE_CEILING));
        }
        truth.push(t);
        labels.push(row_l);
        conf.push(row_z);
    }
    let verdicts = VerdictMatrix::new(labels, conf, spec.detector_names())?;
    Ok(SyntheticData { verdicts, truth })
}

/// Majority-vote and Bayesian results on one verdict matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinerComparison {
    pub majority: MethodMetrics,
    pub bayes: MethodMetrics,
    /// Posterior mean confusion diagonals, one `[pi_00, pi_11]` per detector.
    pub confusion_mean: Vec<[f64; 2]>,
}

pub fn compare_combiners(
    verdicts: &VerdictMatrix,
    truth: &[bool],
    shrinkage: f64,
    config: &SamplerConfig,
) -> Result<CombinerComparison> {
    let summary = bayes_combine(verdicts, shrinkage, config)?;
    Ok(CombinerComparison {
        majority: MethodMetrics::new(MAJORITY_VOTE_NAME, confusion(&majority_vote(verdicts), truth)?)?,
        bayes: MethodMetrics::new(BAYES_NAME, confusion(&classify(&summary, 0.5), truth)?)?,
        confusion_mean: summary.confusion_mean,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub before: CombinerComparison,
    pub after: CombinerComparison,
    /// Relative change in error rate, `(after - before) / before`.
    pub majority_relative_change: f64,
    pub bayes_relative_change: f64,
    /// Posterior mean `[pi_00, pi_11]` of the injected detector.
    pub random_detector_confusion: [f64; 2],
}

impl RobustnessReport {
    pub fn metrics(&self) -> MetricsReport {
        let tag = |m: &MethodMetrics, suffix: &str| MethodMetrics {
            method: format!("{}{suffix}", m.method),
            ..m.clone()
        };
        MetricsReport {
            datasets: Vec::new(),
            methods: vec![
                tag(&self.before.majority, ""),
                tag(&self.before.bayes, ""),
                tag(&self.after.majority, "+Random"),
                tag(&self.after.bayes, "+Random"),
            ],
            config: BTreeMap::new(),
        }
    }
}

fn relative_change(before: f64, after: f64) -> f64 {
    if before == 0.0 {
        if after == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (after - before) / before
    }
}

/// Appends a fair-coin detector reporting clamped full confidence, then
/// reruns both combiners (the Bayesian one with freshly elicited priors).
pub fn robustness_experiment(
    verdicts: &VerdictMatrix,
    truth: &[bool],
    seed: u64,
    shrinkage: f64,
    config: &SamplerConfig,
) -> Result<RobustnessReport> {
    let before = compare_combiners(verdicts, truth, shrinkage, config)?;
    let random = random_detector(verdicts.n_points(), seed);
    let labels: Vec<bool> = random.iter().map(|v| v.anomaly).collect();
    let conf: Vec<f64> = random.iter().map(|v| v.confidence).collect();
    let injected = verdicts.with_detector(RANDOM_NAME, &labels, &conf)?;
    let after = compare_combiners(&injected, truth, shrinkage, config)?;
    let random_detector_confusion = *after.confusion_mean.last().expect("injected column");
    Ok(RobustnessReport {
        majority_relative_change: relative_change(before.majority.error_rate, after.majority.error_rate),
        bayes_relative_change: relative_change(before.bayes.error_rate, after.bayes.error_rate),
        random_detector_confusion,
        before,
        after,
    })
}
