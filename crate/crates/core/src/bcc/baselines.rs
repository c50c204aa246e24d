use serde::{Deserialize, Serialize};

use super::VerdictMatrix;

/// Anomalous iff strictly more than half the detectors say so; ties are normal.
pub fn majority_vote(verdicts: &VerdictMatrix) -> Vec<bool> {
    let k = verdicts.n_detectors();
    (0..verdicts.n_points())
        .map(|i| 2 * verdicts.row_labels(i).iter().filter(|&&l| l).count() > k)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DawidSkeneResult {
    pub labels: Vec<bool>,
    /// Posterior probability that each point is anomalous.
    pub posteriors: Vec<f64>,
    /// `confusion[k][j][c]`: probability detector k outputs c when the truth is j.
    pub confusion: Vec<[[f64; 2]; 2]>,
    pub prevalence: f64,
    /// Observed-data log-likelihood after each M-step.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl DawidSkeneResult {
    /// Per-detector error rates `[false-positive rate, false-negative rate]`.
    pub fn error_rates(&self) -> Vec<[f64; 2]> {
        self.confusion.iter().map(|c| [c[0][1], c[1][0]]).collect()
    }

    /// Per-detector diagonal `[pi_00, pi_11]`.
    pub fn diagonal(&self) -> Vec<[f64; 2]> {
        self.confusion.iter().map(|c| [c[0][0], c[1][1]]).collect()
    }
}

/// Guards `ln(0)` in degenerate fits.
const PROB_FLOOR: f64 = 1e-12;

fn ln_floor(p: f64) -> f64 {
    p.max(PROB_FLOOR).ln()
}

/// Log of `p(t_i = j) * prod_k p(c_ik | t_i = j)` for j = 0, 1.
fn class_log_weights(
    verdicts: &VerdictMatrix,
    i: usize,
    prevalence: f64,
    confusion: &[[[f64; 2]; 2]],
) -> [f64; 2] {
    let mut w = [ln_floor(1.0 - prevalence), ln_floor(prevalence)];
    for (k, &c) in verdicts.row_labels(i).iter().enumerate() {
        for (j, wj) in w.iter_mut().enumerate() {
            *wj += ln_floor(confusion[k][j][c as usize]);
        }
    }
    w
}

fn log_sum_exp(w: [f64; 2]) -> f64 {
    let m = w[0].max(w[1]);
    m + ((w[0] - m).exp() + (w[1] - m).exp()).ln()
}

/// Two-class Dawid-Skene EM.
///
/// Starts from majority-vote hard labels, then alternates re-estimating
/// prevalence and per-detector confusion matrices from the soft labels (M)
/// with recomputing the soft labels (E). Stops when no soft label moves by
/// more than `tol` or after `max_iters` rounds.
pub fn dawid_skene_em(verdicts: &VerdictMatrix, max_iters: usize, tol: f64) -> DawidSkeneResult {
    let (n, k_count) = (verdicts.n_points(), verdicts.n_detectors());
    if k_count < 2 {
        log::warn!("Dawid-Skene with a single detector is not identifiable");
    }
    let mut soft: Vec<f64> = majority_vote(verdicts)
        .into_iter()
        .map(|l| if l { 1.0 } else { 0.0 })
        .collect();
    let mut confusion = vec![[[0.5; 2]; 2]; k_count];
    let mut prevalence = 0.5;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iters {
        iterations += 1;

        // M-step
        let total: f64 = soft.iter().sum();
        prevalence = total / n as f64;
        for (k, conf) in confusion.iter_mut().enumerate() {
            let mut counts = [[0.0f64; 2]; 2];
            for (i, &s) in soft.iter().enumerate() {
                let c = verdicts.label(i, k) as usize;
                counts[1][c] += s;
                counts[0][c] += 1.0 - s;
            }
            for j in 0..2 {
                let row = counts[j][0] + counts[j][1];
                conf[j] = if row > 0.0 {
                    [counts[j][0] / row, counts[j][1] / row]
                } else {
                    [0.5, 0.5]
                };
            }
        }

        // E-step
        let mut ll = 0.0;
        let mut delta = 0.0f64;
        for (i, s) in soft.iter_mut().enumerate() {
            let w = class_log_weights(verdicts, i, prevalence, &confusion);
            let norm = log_sum_exp(w);
            ll += norm;
            let next = (w[1] - norm).exp();
            delta = delta.max((next - *s).abs());
            *s = next;
        }
        trace.push(ll);
        if delta < tol {
            converged = true;
            break;
        }
    }

    DawidSkeneResult {
        labels: soft.iter().map(|&p| p > 0.5).collect(),
        posteriors: soft,
        confusion,
        prevalence,
        log_likelihood: trace,
        iterations,
        converged,
    }
}
