mod config;
mod pipeline;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use bayescombine::bcc::{dawid_skene_em, DawidSkeneResult};
use bayescombine::evaluation::{
    generate_synthetic, MethodMetrics, SyntheticData, BAYES_NAME, MAJORITY_VOTE_NAME,
};
use bayescombine::{
    bayes_combine, classify, confusion, load_series, majority_vote, run_detectors, ConfusionCounts, MetricsReport,
    SamplerConfig, SeriesFormat, SyntheticSpec,
};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use config::RunConfig;
use pipeline::{ensemble_series, series_seed, write_file, write_verdicts, EnsembleOutcome, INJECTED_SUFFIX};

/// Unsupervised anomaly detection with a Bayesian detector ensemble.
#[derive(Debug, Parser)]
#[command(name = "bayescombine", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Maximum number of series processed at once.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory; overrides the config file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the base detectors and write per-point verdicts.
    Detect {
        /// Input CSV paths or globs; replaces `inputs` from the config.
        inputs: Vec<String>,
    },
    /// Run detectors, combine them, and report posteriors and metrics.
    Ensemble {
        inputs: Vec<String>,
        /// Also rerun the combiners with a random detector appended.
        #[arg(long)]
        inject_random_detector: bool,
    },
    /// Generate a synthetic verdict matrix and compare the combiners on it.
    Simulate {
        /// TOML file describing the synthetic benchmark.
        spec: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BAYESCOMBINE_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Returns whether every requested series succeeded.
fn run(cli: Cli) -> anyhow::Result<bool> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = cli.out {
        config.output_dir = out;
    }
    config.validate()?;
    std::fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("creating {}", config.output_dir.display()))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()?;

    match cli.command {
        Command::Detect { inputs } => {
            let paths = resolve_inputs(&inputs, &config)?;
            pool.install(|| cmd_detect(&paths, &config))
        }
        Command::Ensemble {
            inputs,
            inject_random_detector,
        } => {
            let paths = resolve_inputs(&inputs, &config)?;
            pool.install(|| cmd_ensemble(&paths, &config, inject_random_detector))
        }
        Command::Simulate { spec } => cmd_simulate(&spec, &config),
    }
}

fn has_glob_chars(s: &str) -> bool {
    s.contains(['*', '?', '['])
}

/// Expands patterns into a sorted, de-duplicated list. Literal paths are
/// kept even when missing so the failure is reported against them.
fn resolve_inputs(cli_inputs: &[String], config: &RunConfig) -> anyhow::Result<Vec<PathBuf>> {
    let patterns = if cli_inputs.is_empty() { &config.inputs } else { cli_inputs };
    let mut paths = Vec::new();
    for p in patterns {
        if has_glob_chars(p) {
            for entry in glob::glob(p).with_context(|| format!("bad glob {p}"))? {
                paths.push(entry?);
            }
        } else {
            paths.push(PathBuf::from(p));
        }
    }
    paths.sort();
    paths.dedup();
    if paths.is_empty() {
        bail!("no inputs");
    }
    Ok(paths)
}

fn report_failures(failures: &[(PathBuf, String)]) {
    for (path, err) in failures {
        log::error!("{}: {err}", path.display());
        eprintln!("failed: {}: {err}", path.display());
    }
}

fn cmd_detect(paths: &[PathBuf], config: &RunConfig) -> anyhow::Result<bool> {
    let suite = config.suite()?;
    let results: Vec<anyhow::Result<String>> = paths
        .par_iter()
        .map(|path| {
            let series = load_series(path, SeriesFormat::default())?;
            let runs = run_detectors(&series, &suite);
            write_verdicts(&config.output_dir, &series, &runs)?;
            let flagged: Vec<String> = runs
                .iter()
                .map(|r| format!("{}={}", r.name, r.verdicts.iter().filter(|v| v.anomaly).count()))
                .collect();
            Ok(format!("{}: {}", series.id(), flagged.join(" ")))
        })
        .collect();
    let mut failures = Vec::new();
    for (path, r) in paths.iter().zip(results) {
        match r {
            Ok(line) => println!("{line}"),
            Err(e) => failures.push((path.clone(), format!("{e:#}"))),
        }
    }
    report_failures(&failures);
    Ok(failures.is_empty())
}

#[derive(Debug, Serialize)]
struct Failure {
    path: String,
    error: String,
}

#[derive(Debug, Serialize)]
struct RandomDetectorPosterior {
    id: String,
    confusion_mean: [f64; 2],
}

#[derive(Debug, Serialize)]
struct EnsembleReport {
    series: Vec<String>,
    failures: Vec<Failure>,
    /// Pooled over series with ground truth; `None` when there are none.
    metrics: Option<MetricsReport>,
    metrics_status: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    random_detector: Vec<RandomDetectorPosterior>,
}

fn config_echo(config: &RunConfig) -> BTreeMap<String, String> {
    let s = &config.sampler;
    let d = &config.detectors;
    [
        ("seed", config.seed.to_string()),
        ("shrinkage", config.shrinkage.to_string()),
        ("sigma_multiplier", d.sigma_multiplier.to_string()),
        ("season_length", d.holt_winters.season_length.to_string()),
        ("goldilocks_window", d.goldilocks.window.to_string()),
        ("arma_order", format!("({}, {})", d.arma.p, d.arma.q)),
        ("iterations", s.iterations.to_string()),
        ("burn_in", s.burn_in.to_string()),
        ("thin", s.thin.to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn pool_metrics(outcomes: &[EnsembleOutcome], config: &RunConfig) -> anyhow::Result<Option<MetricsReport>> {
    let mut pooled: Vec<(String, ConfusionCounts)> = Vec::new();
    let mut datasets = Vec::new();
    for o in outcomes {
        let Some(truth) = &o.truth else { continue };
        datasets.push(o.id.clone());
        for (name, counts) in o.methods.counts(truth)? {
            match pooled.iter_mut().find(|(n, _)| *n == name) {
                Some((_, c)) => *c += counts,
                None => pooled.push((name, counts)),
            }
        }
    }
    if datasets.is_empty() {
        return Ok(None);
    }
    let methods = pooled
        .into_iter()
        .map(|(n, c)| MethodMetrics::new(n, c))
        .collect::<bayescombine::Result<Vec<_>>>()?;
    Ok(Some(MetricsReport {
        datasets,
        methods,
        config: config_echo(config),
    }))
}

fn cmd_ensemble(paths: &[PathBuf], config: &RunConfig, inject: bool) -> anyhow::Result<bool> {
    let results: Vec<anyhow::Result<EnsembleOutcome>> = paths
        .par_iter()
        .map(|path| {
            let series = load_series(path, SeriesFormat::default())?;
            ensemble_series(&series, config, inject)
        })
        .collect();

    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for (path, r) in paths.iter().zip(results) {
        match r {
            Ok(o) => outcomes.push(o),
            Err(e) => failures.push((path.clone(), format!("{e:#}"))),
        }
    }
    report_failures(&failures);

    let metrics = pool_metrics(&outcomes, config)?;
    let unlabeled = outcomes.iter().filter(|o| o.truth.is_none()).count();
    let metrics_status = match (&metrics, unlabeled) {
        (None, _) => "unavailable: no input carries ground truth".to_string(),
        (Some(_), 0) => "pooled over all series".to_string(),
        (Some(_), n) => format!("pooled over labeled series; {n} unlabeled series omitted"),
    };
    let report = EnsembleReport {
        series: outcomes.iter().map(|o| o.id.clone()).collect(),
        failures: failures
            .iter()
            .map(|(p, e)| Failure {
                path: p.display().to_string(),
                error: e.clone(),
            })
            .collect(),
        metrics_status,
        random_detector: outcomes
            .iter()
            .filter_map(|o| {
                o.injected.as_ref().map(|inj| RandomDetectorPosterior {
                    id: o.id.clone(),
                    confusion_mean: inj.random_detector_confusion,
                })
            })
            .collect(),
        metrics,
    };
    let dir = &config.output_dir;
    write_file(&dir.join("report.json"), &(serde_json::to_string_pretty(&report)? + "\n"))?;

    let mut text = String::new();
    match &report.metrics {
        Some(m) => {
            let base = MetricsReport {
                methods: m
                    .methods
                    .iter()
                    .filter(|x| !x.method.ends_with(INJECTED_SUFFIX))
                    .cloned()
                    .collect(),
                ..m.clone()
            };
            text.push_str(&base.to_table());
            if inject {
                text.push_str(&robustness_table(m));
            }
        }
        None => text.push_str("metrics unavailable: no input carries ground truth\n"),
    }
    for r in &report.random_detector {
        let _ = writeln!(
            text,
            "{}: random detector posterior pi_00 = {:.3}, pi_11 = {:.3}",
            r.id, r.confusion_mean[0], r.confusion_mean[1]
        );
    }
    write_file(&dir.join("report.txt"), &text)?;
    print!("{text}");
    Ok(failures.is_empty())
}

/// Before/after table for the two combiners with relative error changes.
fn robustness_table(m: &MetricsReport) -> String {
    let pick = |name: &str| m.method(name).cloned();
    let names = [
        MAJORITY_VOTE_NAME.to_string(),
        format!("{MAJORITY_VOTE_NAME}{INJECTED_SUFFIX}"),
        BAYES_NAME.to_string(),
        format!("{BAYES_NAME}{INJECTED_SUFFIX}"),
    ];
    let methods: Vec<MethodMetrics> = names.iter().filter_map(|n| pick(n)).collect();
    let mut out = String::from("\nWith a random detector appended:\n");
    out.push_str(
        &MetricsReport {
            methods,
            ..MetricsReport::default()
        }
        .to_table(),
    );
    for base in [MAJORITY_VOTE_NAME, BAYES_NAME] {
        if let (Some(a), Some(b)) = (pick(base), pick(&format!("{base}{INJECTED_SUFFIX}"))) {
            if a.error_rate > 0.0 {
                let _ = writeln!(
                    out,
                    "{base} error rate change: {:+.1}%",
                    100.0 * (b.error_rate - a.error_rate) / a.error_rate
                );
            }
        }
    }
    out
}

#[derive(Debug, Serialize)]
struct DetectorRecovery {
    name: String,
    true_diagonal: [f64; 2],
    bayes_posterior_mean: [f64; 2],
    dawid_skene: [f64; 2],
}

#[derive(Debug, Serialize)]
struct SimulateReport {
    spec: SyntheticSpec,
    sampler: SamplerConfig,
    shrinkage: f64,
    detectors: Vec<DetectorRecovery>,
    /// Largest absolute gap between the Bayesian posterior means and the truth.
    max_abs_error_bayes: f64,
    methods: Vec<MethodMetrics>,
    acceptance_rate: f64,
}

fn write_synthetic(dir: &Path, data: &SyntheticData) -> anyhow::Result<()> {
    let v = &data.verdicts;
    let mut out = String::from("point,truth");
    for n in v.detector_names() {
        let _ = write!(out, ",{n}_label,{n}_z");
    }
    out.push('\n');
    for i in 0..v.n_points() {
        let _ = write!(out, "{i},{}", data.truth[i] as u8);
        for k in 0..v.n_detectors() {
            let _ = write!(out, ",{},{}", v.label(i, k) as u8, v.confidence(i, k));
        }
        out.push('\n');
    }
    write_file(&dir.join("synthetic.csv"), &out)
}

fn cmd_simulate(spec_path: &Path, config: &RunConfig) -> anyhow::Result<bool> {
    let text = std::fs::read_to_string(spec_path)
        .with_context(|| format!("reading spec {}", spec_path.display()))?;
    let spec: SyntheticSpec =
        toml::from_str(&text).with_context(|| format!("parsing spec {}", spec_path.display()))?;
    spec.validate()?;
    if spec.diagonals.len() == 1 {
        log::warn!("a single detector cannot be told apart from the truth it reports; recovery is prior-driven");
        eprintln!("warning: K = 1, confusion parameters are weakly identified");
    }
    let data = generate_synthetic(&spec)?;
    write_synthetic(&config.output_dir, &data)?;

    let sampler = SamplerConfig {
        seed: series_seed(config.seed, "synthetic", 1),
        ..config.sampler.clone()
    };
    let summary = bayes_combine(&data.verdicts, config.shrinkage, &sampler)?;
    let ds: DawidSkeneResult = dawid_skene_em(&data.verdicts, 500, 1e-8);
    let methods = vec![
        MethodMetrics::new(MAJORITY_VOTE_NAME, confusion(&majority_vote(&data.verdicts), &data.truth)?)?,
        MethodMetrics::new("DawidSkene", confusion(&ds.labels, &data.truth)?)?,
        MethodMetrics::new(BAYES_NAME, confusion(&classify(&summary, 0.5), &data.truth)?)?,
    ];
    let ds_diag = ds.diagonal();
    let detectors: Vec<DetectorRecovery> = data
        .verdicts
        .detector_names()
        .iter()
        .enumerate()
        .map(|(k, name)| DetectorRecovery {
            name: name.clone(),
            true_diagonal: spec.diagonals[k],
            bayes_posterior_mean: summary.confusion_mean[k],
            dawid_skene: ds_diag[k],
        })
        .collect();
    let max_abs_error_bayes = detectors
        .iter()
        .flat_map(|d| (0..2).map(move |j| (d.bayes_posterior_mean[j] - d.true_diagonal[j]).abs()))
        .fold(0.0, f64::max);
    let report = SimulateReport {
        spec,
        sampler,
        shrinkage: config.shrinkage,
        detectors,
        max_abs_error_bayes,
        methods,
        acceptance_rate: summary.acceptance_rate,
    };
    write_file(
        &config.output_dir.join("simulate.json"),
        &(serde_json::to_string_pretty(&report)? + "\n"),
    )?;

    let mut out = MetricsReport {
        methods: report.methods.clone(),
        ..MetricsReport::default()
    }
    .to_table();
    let _ = writeln!(out, "\n{:<10} {:>15} {:>15} {:>15}", "detector", "true", "bayes", "dawid-skene");
    for d in &report.detectors {
        let pair = |p: [f64; 2]| format!("{:.3}/{:.3}", p[0], p[1]);
        let _ = writeln!(
            out,
            "{:<10} {:>15} {:>15} {:>15}",
            d.name,
            pair(d.true_diagonal),
            pair(d.bayes_posterior_mean),
            pair(d.dawid_skene)
        );
    }
    write_file(&config.output_dir.join("simulate.txt"), &out)?;
    print!("{out}");
    Ok(true)
}
