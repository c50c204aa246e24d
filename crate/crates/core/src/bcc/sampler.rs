//! Posterior density and Metropolis-within-Gibbs sampler.
//!
//! Parameters: true labels `t_i`, per-point anomaly rates `nu_i` and, for each
//! detector, the two diagonal confusion entries `pi[k][j]` (probability the
//! detector reports class j when the truth is j). Each sweep draws every
//! `(t_i, nu_i)` pair jointly: `t_i` from its two-point conditional with
//! `nu_i` integrated out, then `nu_i` from its Beta conditional. Every `pi`
//! entry is then updated by a Gaussian random walk on the logit scale.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::VerdictMatrix;
use crate::error::{Error, Result};
use crate::priors::PriorSet;

/// Parameters are kept inside `[PARAM_EPS, 1 - PARAM_EPS]`.
const PARAM_EPS: f64 = 1e-9;
/// Proposals are tuned during burn-in toward this acceptance rate.
const TARGET_ACCEPTANCE: f64 = 0.44;
const ADAPT_BATCH: usize = 50;
const MIN_STEP: f64 = 1e-3;
const MAX_STEP: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub t: Vec<bool>,
    /// `pi[k][j]`, j = 0 (normal) or 1 (anomaly).
    pub pi: Vec<[f64; 2]>,
    pub nu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Initial logit-scale random-walk step.
    pub proposal_scale: f64,
    /// Tune per-parameter step sizes during burn-in.
    pub adapt: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            burn_in: 1000,
            thin: 2,
            seed: 0,
            proposal_scale: 0.1,
            adapt: true,
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn n_samples(&self) -> usize {
        self.iterations.saturating_sub(self.burn_in) / self.thin.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.thin == 0 {
            return Err(Error::InvalidArgument(
                "iterations and thin must be positive".into(),
            ));
        }
        if self.burn_in > self.iterations {
            return Err(Error::InvalidArgument(format!(
                "burn_in {} exceeds iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if !(self.proposal_scale > 0.0 && self.proposal_scale.is_finite()) {
            return Err(Error::InvalidArgument(
                "proposal_scale must be positive".into(),
            ));
        }
        if self.n_samples() == 0 {
            return Err(Error::EmptyChain);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    /// Posterior mean of `t_i` (Rao-Blackwellized over the label conditional).
    pub p_anomaly: Vec<f64>,
    /// `confusion_mean[k][j]` is the posterior mean of `pi[k][j]`.
    pub confusion_mean: Vec<[f64; 2]>,
    pub confusion_variance: Vec<[f64; 2]>,
    pub nu_mean: Vec<f64>,
    /// Fraction of accepted `pi` proposals after burn-in.
    pub acceptance_rate: f64,
    pub n_samples: usize,
}

impl PosteriorSummary {
    pub(crate) fn empty(points: usize, detectors: usize) -> Self {
        Self {
            p_anomaly: vec![0.0; points],
            confusion_mean: vec![[0.0; 2]; detectors],
            confusion_variance: vec![[0.0; 2]; detectors],
            nu_mean: vec![0.0; points],
            acceptance_rate: 0.0,
            n_samples: 0,
        }
    }
}

/// Retained confusion-diagonal draws, one `K x 2` block per sample.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ChainTrace {
    pub detector_names: Vec<String>,
    pub pi: Vec<Vec<[f64; 2]>>,
}

fn check_shapes(verdicts: &VerdictMatrix, priors: &PriorSet) -> Result<()> {
    if priors.n_detectors() != verdicts.n_detectors() || priors.n_points() != verdicts.n_points() {
        return Err(Error::Shape(format!(
            "priors cover {} points x {} detectors, verdicts have {} x {}",
            priors.n_points(),
            priors.n_detectors(),
            verdicts.n_points(),
            verdicts.n_detectors()
        )));
    }
    Ok(())
}

fn interior(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

/// Log of the unnormalized joint posterior `p(pi, t, nu | c)`.
///
/// Returns `-inf` for states on the boundary of the parameter space.
pub fn log_posterior(state: &ModelState, verdicts: &VerdictMatrix, priors: &PriorSet) -> f64 {
    let (n, k_count) = (verdicts.n_points(), verdicts.n_detectors());
    debug_assert_eq!(state.t.len(), n);
    debug_assert_eq!(state.pi.len(), k_count);
    if !state.nu.iter().all(|&v| interior(v)) || !state.pi.iter().flatten().all(|&p| interior(p)) {
        return f64::NEG_INFINITY;
    }
    let mut lp = 0.0;
    for i in 0..n {
        let t = state.t[i];
        lp += if t { state.nu[i].ln() } else { (-state.nu[i]).ln_1p() };
        for k in 0..k_count {
            let pi = state.pi[k][t as usize];
            lp += if verdicts.label(i, k) == t { pi.ln() } else { (-pi).ln_1p() };
        }
        lp += priors.label[i].ln_pdf(state.nu[i]);
    }
    for k in 0..k_count {
        for j in 0..2 {
            lp += priors.confusion[k][j].ln_pdf(state.pi[k][j]);
        }
    }
    lp
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-parameter random-walk step with burn-in tuning.
#[derive(Debug, Clone)]
struct Proposal {
    log_step: f64,
    accepted: usize,
    tried: usize,
}

impl Proposal {
    fn new(step: f64) -> Self {
        Self {
            log_step: step.ln(),
            accepted: 0,
            tried: 0,
        }
    }

    fn step(&self) -> f64 {
        self.log_step.exp()
    }

    fn record(&mut self, accepted: bool) {
        self.tried += 1;
        self.accepted += accepted as usize;
    }

    fn adapt(&mut self, batch: usize) {
        if self.tried == 0 {
            return;
        }
        let rate = self.accepted as f64 / self.tried as f64;
        let delta = (1.0 / (batch as f64).sqrt()).min(0.1);
        self.log_step += if rate > TARGET_ACCEPTANCE { delta } else { -delta };
        self.log_step = self.log_step.clamp(MIN_STEP.ln(), MAX_STEP.ln());
        self.accepted = 0;
        self.tried = 0;
    }
}

/// One random-walk Metropolis step on the logit scale for a parameter in
/// (0, 1). `log_target` is the log density in the original coordinate; the
/// change-of-variables term `ln x + ln(1 - x)` is added here. Proposals that
/// leave `[PARAM_EPS, 1 - PARAM_EPS]` are rejected.
fn logit_step<R: Rng, F: Fn(f64) -> f64>(
    rng: &mut R,
    current: f64,
    current_lp: f64,
    step: f64,
    log_target: F,
) -> (f64, f64, bool) {
    let noise: f64 = StandardNormal.sample(rng);
    let proposed = expit(logit(current) + step * noise);
    if !(PARAM_EPS..=1.0 - PARAM_EPS).contains(&proposed) {
        return (current, current_lp, false);
    }
    let jac = |x: f64| x.ln() + (-x).ln_1p();
    let prop_lp = log_target(proposed);
    let log_ratio = prop_lp + jac(proposed) - current_lp - jac(current);
    let u: f64 = rng.random();
    if log_ratio >= 0.0 || u.ln() < log_ratio {
        (proposed, prop_lp, true)
    } else {
        (current, current_lp, false)
    }
}

/// `P(t_i = 1 | c_i, pi)` with `nu_i` integrated out, given the logs of the
/// confusion diagonals and their complements.
fn label_conditional(row: &[bool], ln_pi: &[[f64; 2]], ln_not_pi: &[[f64; 2]], prior_rate: f64) -> f64 {
    let mut lw1 = prior_rate.ln();
    let mut lw0 = (-prior_rate).ln_1p();
    for (k, &said_anomaly) in row.iter().enumerate() {
        if said_anomaly {
            lw1 += ln_pi[k][1];
            lw0 += ln_not_pi[k][0];
        } else {
            lw1 += ln_not_pi[k][1];
            lw0 += ln_pi[k][0];
        }
    }
    1.0 / (1.0 + (lw0 - lw1).exp())
}

/// Labels from the prior anomaly rate, parameters at their prior means.
fn initial_state(priors: &PriorSet) -> ModelState {
    let clamp = |x: f64| x.clamp(PARAM_EPS, 1.0 - PARAM_EPS);
    let nu: Vec<f64> = priors.label.iter().map(|b| clamp(b.mean())).collect();
    ModelState {
        t: nu.iter().map(|&v| crate::priors::estimate_t_hat(v)).collect(),
        pi: priors
            .confusion
            .iter()
            .map(|c| [clamp(c[0].mean()), clamp(c[1].mean())])
            .collect(),
        nu,
    }
}

/// Runs the sampler and summarizes the retained draws.
pub fn run_sampler(
    verdicts: &VerdictMatrix,
    priors: &PriorSet,
    config: &SamplerConfig,
) -> Result<PosteriorSummary> {
    run(verdicts, priors, config, false).map(|(s, _)| s)
}

/// Like [`run_sampler`], additionally returning the retained confusion draws.
pub fn run_sampler_traced(
    verdicts: &VerdictMatrix,
    priors: &PriorSet,
    config: &SamplerConfig,
) -> Result<(PosteriorSummary, ChainTrace)> {
    run(verdicts, priors, config, true)
}

fn run(
    verdicts: &VerdictMatrix,
    priors: &PriorSet,
    config: &SamplerConfig,
    trace: bool,
) -> Result<(PosteriorSummary, ChainTrace)> {
    config.validate()?;
    check_shapes(verdicts, priors)?;
    let (n, k_count) = (verdicts.n_points(), verdicts.n_detectors());

    let mut state = initial_state(priors);
    if !log_posterior(&state, verdicts, priors).is_finite() {
        return Err(Error::InvalidArgument(
            "initial state has zero posterior density".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pi_prop = vec![[Proposal::new(config.proposal_scale), Proposal::new(config.proposal_scale)]; k_count];

    let mut summary = PosteriorSummary::empty(n, k_count);
    let mut pi_sq = vec![[0.0f64; 2]; k_count];
    let mut chain = ChainTrace {
        detector_names: verdicts.detector_names().to_vec(),
        pi: Vec::new(),
    };
    let mut cond = vec![0.0f64; n];
    let (mut accepted, mut tried) = (0usize, 0usize);
    // agree[k][j] / disagree[k][j]: points with t = j where detector k said j / 1 - j
    let mut agree = vec![[0usize; 2]; k_count];
    let mut disagree = vec![[0usize; 2]; k_count];

    for iter in 0..config.iterations {
        // Labels: exact two-point conditional with nu_i collapsed.
        let ln_pi: Vec<[f64; 2]> = state.pi.iter().map(|p| [p[0].ln(), p[1].ln()]).collect();
        let ln_not_pi: Vec<[f64; 2]> = state.pi.iter().map(|p| [(-p[0]).ln_1p(), (-p[1]).ln_1p()]).collect();
        for counts in agree.iter_mut().chain(disagree.iter_mut()) {
            *counts = [0; 2];
        }
        for i in 0..n {
            let p1 = label_conditional(verdicts.row_labels(i), &ln_pi, &ln_not_pi, priors.label[i].mean());
            cond[i] = p1;
            let t = rng.random::<f64>() < p1;
            state.t[i] = t;
            let j = t as usize;
            for (k, &said_anomaly) in verdicts.row_labels(i).iter().enumerate() {
                if said_anomaly == t {
                    agree[k][j] += 1;
                } else {
                    disagree[k][j] += 1;
                }
            }
        }

        let counting = iter >= config.burn_in;

        // Confusion diagonals.
        for k in 0..k_count {
            for j in 0..2 {
                let prior = priors.confusion[k][j];
                let (a, d) = (agree[k][j] as f64, disagree[k][j] as f64);
                let target = |p: f64| a * p.ln() + d * (-p).ln_1p() + prior.ln_pdf(p);
                let current = state.pi[k][j];
                let (next, _, ok) = logit_step(&mut rng, current, target(current), pi_prop[k][j].step(), target);
                state.pi[k][j] = next;
                pi_prop[k][j].record(ok);
                if counting {
                    accepted += ok as usize;
                    tried += 1;
                }
            }
        }

        // Anomaly rates: conjugate given the freshly drawn label.
        for i in 0..n {
            let prior = priors.label[i];
            let t = state.t[i] as u8 as f64;
            let draw = Beta::new(prior.alpha + t, prior.beta + 1.0 - t)
                .map(|b| b.sample(&mut rng))
                .unwrap_or(prior.mean());
            state.nu[i] = draw.clamp(PARAM_EPS, 1.0 - PARAM_EPS);
        }

        if config.adapt && iter < config.burn_in && (iter + 1) % ADAPT_BATCH == 0 {
            let batch = (iter + 1) / ADAPT_BATCH;
            pi_prop.iter_mut().flatten().for_each(|p| p.adapt(batch));
        }

        if counting && (iter - config.burn_in + 1).is_multiple_of(config.thin) {
            summary.n_samples += 1;
            for i in 0..n {
                summary.p_anomaly[i] += cond[i];
                summary.nu_mean[i] += state.nu[i];
            }
            for k in 0..k_count {
                for j in 0..2 {
                    summary.confusion_mean[k][j] += state.pi[k][j];
                    pi_sq[k][j] += state.pi[k][j] * state.pi[k][j];
                }
            }
            if trace {
                chain.pi.push(state.pi.clone());
            }
        }
    }

    let m = summary.n_samples as f64;
    summary.p_anomaly.iter_mut().for_each(|p| *p = (*p / m).clamp(0.0, 1.0));
    summary.nu_mean.iter_mut().for_each(|v| *v /= m);
    for k in 0..k_count {
        for j in 0..2 {
            let mean = summary.confusion_mean[k][j] / m;
            summary.confusion_mean[k][j] = mean;
            summary.confusion_variance[k][j] = (pi_sq[k][j] / m - mean * mean).max(0.0);
        }
    }
    summary.acceptance_rate = if tried > 0 {
        accepted as f64 / tried as f64
    } else {
        0.0
    };
    Ok((summary, chain))
}
