//! Per-series work: detection, combination and the files written for it.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Context;
use bayescombine::bcc::{run_sampler_traced, ChainTrace};
use bayescombine::detectors::{random_detector, RANDOM_NAME};
use bayescombine::evaluation::{BAYES_NAME, MAJORITY_VOTE_NAME};
use bayescombine::{
    classify, confusion, elicit_priors, majority_vote, run_detectors, run_sampler, verdict_matrix, ConfusionCounts,
    DetectorRun, LabeledSeries, PosteriorSummary, SamplerConfig, VerdictMatrix,
};
use serde::Serialize;

use crate::config::RunConfig;

/// Suffix for methods rerun with the random detector appended.
pub const INJECTED_SUFFIX: &str = "+Random";

/// Independent sub-seeds for one series, stable across runs and job counts.
pub fn series_seed(global: u64, id: &str, stream: u64) -> u64 {
    // FNV-1a over the id, then a splitmix64 finalizer
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = global ^ h ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const SAMPLER_STREAM: u64 = 1;
const RANDOM_STREAM: u64 = 2;
const INJECTED_SAMPLER_STREAM: u64 = 3;

pub fn write_verdicts(dir: &Path, series: &LabeledSeries, runs: &[DetectorRun]) -> anyhow::Result<()> {
    let mut out = String::from("timestamp,value");
    for r in runs {
        let n = &r.name;
        let _ = write!(out, ",{n}_label,{n}_raw,{n}_p,{n}_z");
    }
    out.push('\n');
    for (i, p) in series.points().iter().enumerate() {
        let _ = write!(out, "{},{}", p.timestamp, p.value);
        for r in runs {
            let v = &r.verdicts[i];
            let _ = write!(out, ",{},{},{},{}", v.anomaly as u8, v.raw_score, v.probability, v.confidence);
        }
        out.push('\n');
    }
    write_file(&dir.join(format!("{}.verdicts.csv", series.id())), &out)
}

pub fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Labels from every method for one series, in report column order.
#[derive(Debug, Clone)]
pub struct MethodLabels {
    pub names: Vec<String>,
    pub labels: Vec<Vec<bool>>,
}

impl MethodLabels {
    fn push(&mut self, name: impl Into<String>, labels: Vec<bool>) {
        self.names.push(name.into());
        self.labels.push(labels);
    }

    pub fn counts(&self, truth: &[bool]) -> anyhow::Result<Vec<(String, ConfusionCounts)>> {
        self.names
            .iter()
            .zip(&self.labels)
            .map(|(n, l)| Ok((n.clone(), confusion(l, truth)?)))
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InjectedPosterior {
    pub posterior: PosteriorSummary,
    /// Posterior mean `[pi_00, pi_11]` of the random detector.
    pub random_detector_confusion: [f64; 2],
}

#[derive(Debug, Serialize)]
struct PosteriorFile<'a> {
    id: &'a str,
    detectors: Vec<&'a str>,
    skipped: BTreeMap<&'a str, &'a str>,
    sampler_seed: u64,
    prior_confusion_mean: Vec<[f64; 2]>,
    posterior: &'a PosteriorSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    with_random_detector: Option<&'a InjectedPosterior>,
}

pub struct EnsembleOutcome {
    pub id: String,
    pub methods: MethodLabels,
    pub truth: Option<Vec<bool>>,
    pub injected: Option<InjectedPosterior>,
}

fn sampler_config(config: &RunConfig, seed: u64) -> SamplerConfig {
    SamplerConfig {
        seed,
        ..config.sampler.clone()
    }
}

fn bayes_run(
    verdicts: &VerdictMatrix,
    config: &RunConfig,
    seed: u64,
    trace: bool,
) -> anyhow::Result<(PosteriorSummary, Option<ChainTrace>, Vec<[f64; 2]>)> {
    let priors = elicit_priors(verdicts, config.shrinkage)?;
    let prior_means = priors.confusion.iter().map(|c| [c[0].mean(), c[1].mean()]).collect();
    let sampler = sampler_config(config, seed);
    if trace {
        let (s, t) = run_sampler_traced(verdicts, &priors, &sampler)?;
        Ok((s, Some(t), prior_means))
    } else {
        Ok((run_sampler(verdicts, &priors, &sampler)?, None, prior_means))
    }
}

/// Runs the full pipeline on one series and writes its files.
pub fn ensemble_series(
    series: &LabeledSeries,
    config: &RunConfig,
    inject_random: bool,
) -> anyhow::Result<EnsembleOutcome> {
    let id = series.id();
    let runs = run_detectors(series, &config.suite()?);
    let verdicts = verdict_matrix(&runs)?;
    let seed = series_seed(config.seed, id, SAMPLER_STREAM);
    let (summary, trace, prior_means) = bayes_run(&verdicts, config, seed, config.dump_chain)?;

    let mut methods = MethodLabels {
        names: Vec::new(),
        labels: Vec::new(),
    };
    for r in &runs {
        methods.push(r.name.clone(), r.verdicts.iter().map(|v| v.anomaly).collect());
    }
    methods.push(MAJORITY_VOTE_NAME, majority_vote(&verdicts));
    methods.push(BAYES_NAME, classify(&summary, 0.5));

    let injected = if inject_random {
        let random = random_detector(series.len(), series_seed(config.seed, id, RANDOM_STREAM));
        let labels: Vec<bool> = random.iter().map(|v| v.anomaly).collect();
        let conf: Vec<f64> = random.iter().map(|v| v.confidence).collect();
        let with = verdicts.with_detector(RANDOM_NAME, &labels, &conf)?;
        let (posterior, _, _) = bayes_run(&with, config, series_seed(config.seed, id, INJECTED_SAMPLER_STREAM), false)?;
        methods.push(format!("{MAJORITY_VOTE_NAME}{INJECTED_SUFFIX}"), majority_vote(&with));
        methods.push(format!("{BAYES_NAME}{INJECTED_SUFFIX}"), classify(&posterior, 0.5));
        let random_detector_confusion = *posterior.confusion_mean.last().expect("random column");
        Some(InjectedPosterior {
            posterior,
            random_detector_confusion,
        })
    } else {
        None
    };

    let dir = &config.output_dir;
    let file = PosteriorFile {
        id,
        detectors: runs.iter().map(|r| r.name.as_str()).collect(),
        skipped: runs
            .iter()
            .filter_map(|r| r.skipped.as_deref().map(|why| (r.name.as_str(), why)))
            .collect(),
        sampler_seed: seed,
        prior_confusion_mean: prior_means,
        posterior: &summary,
        with_random_detector: injected.as_ref(),
    };
    write_file(
        &dir.join(format!("{id}.posterior.json")),
        &(serde_json::to_string_pretty(&file)? + "\n"),
    )?;
    write_points(dir, series, &methods, &summary, injected.as_ref())?;
    if let Some(trace) = &trace {
        write_chain(dir, id, trace)?;
    }

    Ok(EnsembleOutcome {
        id: id.to_string(),
        methods,
        truth: series.truth().map(<[bool]>::to_vec),
        injected,
    })
}

fn write_points(
    dir: &Path,
    series: &LabeledSeries,
    methods: &MethodLabels,
    summary: &PosteriorSummary,
    injected: Option<&InjectedPosterior>,
) -> anyhow::Result<()> {
    let mut out = String::from("timestamp,value,truth");
    for n in &methods.names {
        let _ = write!(out, ",{n}");
    }
    out.push_str(",p_anomaly");
    if injected.is_some() {
        let _ = write!(out, ",p_anomaly{INJECTED_SUFFIX}");
    }
    out.push('\n');
    let truth = series.truth();
    for (i, p) in series.points().iter().enumerate() {
        let t = truth.map(|t| (t[i] as u8).to_string()).unwrap_or_default();
        let _ = write!(out, "{},{},{t}", p.timestamp, p.value);
        for l in &methods.labels {
            let _ = write!(out, ",{}", l[i] as u8);
        }
        let _ = write!(out, ",{}", summary.p_anomaly[i]);
        if let Some(inj) = injected {
            let _ = write!(out, ",{}", inj.posterior.p_anomaly[i]);
        }
        out.push('\n');
    }
    write_file(&dir.join(format!("{}.points.csv", series.id())), &out)
}

fn write_chain(dir: &Path, id: &str, trace: &ChainTrace) -> anyhow::Result<()> {
    let mut out = String::from("sample");
    for n in &trace.detector_names {
        let _ = write!(out, ",{n}_pi00,{n}_pi11");
    }
    out.push('\n');
    for (s, draw) in trace.pi.iter().enumerate() {
        let _ = write!(out, "{s}");
        for d in draw {
            let _ = write!(out, ",{},{}", d[0], d[1]);
        }
        out.push('\n');
    }
    write_file(&dir.join(format!("{id}.chain.csv")), &out)
}
