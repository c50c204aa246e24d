use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bayescombine"))
}

/// Seasonal series with a spike every 90 points; `labeled` adds the truth column.
fn write_series(path: &Path, labeled: bool, offset: f64) {
    let mut text = String::from(if labeled { "timestamp,value,is_anomaly\n" } else { "timestamp,value\n" });
    for t in 0..300u32 {
        let season = 8.0 * (2.0 * std::f64::consts::PI * f64::from(t) / 24.0).sin();
        let wobble = f64::from((t * 7919) % 13) * 0.15;
        let spike = t % 90 == 45;
        let v = offset + season + wobble + if spike { 30.0 } else { 0.0 };
        if labeled {
            text.push_str(&format!("{},{v},{}\n", 1000 + 60 * t, spike as u8));
        } else {
            text.push_str(&format!("{},{v}\n", 1000 + 60 * t));
        }
    }
    std::fs::write(path, text).unwrap();
}

fn fast_config(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("fast.toml");
    std::fs::write(&p, "[sampler]\niterations = 600\nburn_in = 200\n").unwrap();
    p
}

fn run(dir: &TempDir, args: &[&str]) -> Output {
    bin()
        .arg("--config")
        .arg(fast_config(dir.path()))
        .arg("--out")
        .arg(dir.path().join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn read(dir: &TempDir, name: &str) -> String {
    std::fs::read_to_string(dir.path().join("out").join(name)).unwrap()
}

#[test]
fn detect_writes_four_detector_groups() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("one.csv");
    write_series(&input, true, 100.0);
    let out = run(&dir, &["detect", input.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(&dir, "one.verdicts.csv");
    let header = csv.lines().next().unwrap();
    for name in ["Var", "Goldi", "HW", "ARMA"] {
        for field in ["label", "raw", "p", "z"] {
            assert!(header.contains(&format!("{name}_{field}")), "{header}");
        }
    }
    assert_eq!(csv.lines().count(), 301);
}

#[test]
fn empty_glob_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let pattern = format!("{}/*.csv", dir.path().display());
    let out = run(&dir, &["detect", &pattern]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no inputs"));
}

#[test]
fn labeled_ensemble_reports_published_layout() {
    let dir = tempfile::tempdir().unwrap();
    write_series(&dir.path().join("a.csv"), true, 100.0);
    write_series(&dir.path().join("b.csv"), true, 50.0);
    let pattern = format!("{}/*.csv", dir.path().display());
    let out = run(&dir, &["ensemble", &pattern]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let report: serde_json::Value = serde_json::from_str(&read(&dir, "report.json")).unwrap();
    let methods: Vec<&str> = report["metrics"]["methods"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["method"].as_str().unwrap())
        .collect();
    assert_eq!(methods, ["Var", "Goldi", "HW", "ARMA", "MajVote", "Bayes"]);
    let bayes = &report["metrics"]["methods"][5]["counts"];
    let total: u64 = ["tp", "fp", "tn", "fn"].iter().map(|k| bayes[k].as_u64().unwrap()).sum();
    assert_eq!(total, 600);

    let table = read(&dir, "report.txt");
    let rows: Vec<&str> = table.lines().skip(1).take(5).map(|l| l.get(..10).unwrap().trim()).collect();
    assert_eq!(rows, ["False Neg", "True Neg", "False Pos", "True Pos", "Error rate"]);

    let posterior: serde_json::Value = serde_json::from_str(&read(&dir, "a.posterior.json")).unwrap();
    assert_eq!(posterior["posterior"]["p_anomaly"].as_array().unwrap().len(), 300);
    assert!(read(&dir, "a.points.csv").starts_with("timestamp,value,truth,Var,Goldi,HW,ARMA,MajVote,Bayes,p_anomaly"));
}

#[test]
fn unlabeled_ensemble_marks_metrics_unavailable() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("u.csv");
    write_series(&input, false, 100.0);
    let out = run(&dir, &["ensemble", input.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&read(&dir, "report.json")).unwrap();
    assert!(report["metrics"].is_null());
    assert!(report["metrics_status"].as_str().unwrap().starts_with("unavailable"));
    assert!(std::fs::metadata(dir.path().join("out/u.posterior.json")).is_ok());
}

#[test]
fn random_detector_injection_adds_robustness_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("r.csv");
    write_series(&input, true, 100.0);
    let out = run(&dir, &["ensemble", "--inject-random-detector", input.to_str().unwrap()]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&read(&dir, "report.json")).unwrap();
    let names: Vec<&str> = report["metrics"]["methods"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["method"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"MajVote+Random") && names.contains(&"Bayes+Random"));
    assert_eq!(report["random_detector"][0]["id"], "r");
    assert!(read(&dir, "report.txt").contains("With a random detector appended"));
}

#[test]
fn partial_failure_sets_exit_code_but_keeps_going() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.csv");
    write_series(&good, true, 100.0);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "timestamp,value\n1,2\n1,3\n").unwrap();
    let out = run(&dir, &["ensemble", good.to_str().unwrap(), bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_str(&read(&dir, "report.json")).unwrap();
    assert_eq!(report["series"][0], "good");
    assert!(report["failures"][0]["error"].as_str().unwrap().contains("duplicate"));
}

#[test]
fn chain_dump_when_requested() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("c.csv");
    write_series(&input, true, 100.0);
    let cfg = dir.path().join("chain.toml");
    std::fs::write(&cfg, "dump_chain = true\n[sampler]\niterations = 300\nburn_in = 100\nthin = 1\n").unwrap();
    let out = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .args(["ensemble", input.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    let chain = read(&dir, "c.chain.csv");
    assert!(chain.starts_with("sample,Var_pi00,Var_pi11"));
    assert_eq!(chain.lines().count(), 201);
}

fn write_spec(dir: &TempDir, body: &str) -> String {
    let p = dir.path().join("spec.toml");
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn simulate_reports_recovery() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        &dir,
        "points = 500\nanomaly_rate = 0.1\nseed = 4\ndiagonals = [[0.9, 0.9], [0.85, 0.85], [0.8, 0.8]]\n",
    );
    let out = run(&dir, &["simulate", &spec]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&read(&dir, "simulate.json")).unwrap();
    assert_eq!(report["detectors"].as_array().unwrap().len(), 3);
    assert_eq!(report["detectors"][0]["true_diagonal"][0], 0.9);
    assert_eq!(read(&dir, "synthetic.csv").lines().count(), 501);
}

#[test]
fn simulate_single_detector_warns() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(&dir, "points = 200\nanomaly_rate = 0.1\nseed = 1\ndiagonals = [[0.9, 0.8]]\n");
    let out = run(&dir, &["simulate", &spec]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("K = 1"));
}

#[test]
fn simulate_rejects_zero_anomaly_rate() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(&dir, "points = 200\nanomaly_rate = 0.0\nseed = 1\ndiagonals = [[0.9, 0.8]]\n");
    let out = run(&dir, &["simulate", &spec]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("anomaly_rate"));
}

#[test]
fn seed_changes_sampler_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("s.csv");
    write_series(&input, true, 100.0);
    let posterior = |seed: &str, out: &str| {
        let run = bin()
            .arg("--config")
            .arg(fast_config(dir.path()))
            .args(["--seed", seed, "--out"])
            .arg(dir.path().join(out))
            .args(["ensemble", input.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(run.status.success());
        std::fs::read_to_string(dir.path().join(out).join("s.posterior.json")).unwrap()
    };
    assert_eq!(posterior("1", "a"), posterior("1", "b"));
    assert_ne!(posterior("1", "a"), posterior("2", "c"));
}
