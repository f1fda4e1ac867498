use std::path::Path;
use std::process::Command;

use stmi_cli::config::{ExperimentConfig, Kind};
use stmi_cli::experiments::{self, fit_slope};
use stmi_cli::output::format_float;

fn parse(src: &str) -> Result<ExperimentConfig, stmi_cli::config::ConfigError> {
    ExperimentConfig::parse(src, Path::new("test.toml"))
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{e}"));
        n += 1;
    }
    assert!(n >= 10);
}

#[test]
fn master_seed_reaches_both_optimizers() {
    let cfg = parse("kind = \"markov-check\"\nseed = 42\n[optimizer]\nseed = 7\n").unwrap();
    assert_eq!(cfg.optimizer.seed, 42);
    assert_eq!(cfg.classical_optimizer.seed, 42);
    assert_eq!(cfg.kind, Kind::MarkovCheck);
}

#[test]
fn errors_point_at_the_offending_line() {
    let e = parse("kind = \"stmi-channel-sweep\"\n\n[sweep]\nchannel = \"depolarizing\"\np = [0.5, 1.5]\n").unwrap_err();
    assert_eq!(e.line, Some(5), "{e}");
    let e = parse("kind = \"stmi-channel-sweep\"\n[sweep]\nchannel = \"amplitude\"\np = [0.5]\n").unwrap_err();
    assert_eq!(e.line, Some(3), "{e}");
    let e = parse("kind = \"stmi-time-series\"\n").unwrap_err();
    assert_eq!(e.line, Some(1), "{e}");
    assert!(e.to_string().starts_with("test.toml:1:"), "{e}");
    let e = parse("kind = \"classical\"\nbogus = 1\n").unwrap_err();
    assert!(e.message.contains("bogus"), "{e}");
}

#[test]
fn json_and_toml_agree() {
    let t = parse("kind = \"appendix-c\"\nseed = 3\n[appendix-c]\nepsilons = [0.01, 0.001]\n").unwrap();
    let j = ExperimentConfig::parse(r#"{"kind": "appendix-c", "seed": 3, "appendix-c": {"epsilons": [0.01, 0.001]}}"#, Path::new("c.json")).unwrap();
    assert_eq!(t, j);
}

#[test]
fn float_formatting() {
    assert_eq!(format_float(f64::INFINITY), "inf");
    assert_eq!(format_float(f64::NAN), "nan");
    assert_eq!(format_float(0.1), "0.1");
    assert_eq!(format_float(2.0), "2");
}

#[test]
fn slope_of_a_line() {
    let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 3.0 - 0.5 * i as f64)).collect();
    assert!((fit_slope(&pts) + 0.5).abs() < 1e-14);
}

#[test]
fn sweep_rows_are_sorted_and_complete() {
    let cfg = parse("kind = \"stmi-channel-sweep\"\n[sweep]\nchannel = \"dephasing\"\np = [0.9, 0.2, 0.5]\nmethod = \"both\"\n").unwrap();
    let out = experiments::run(&cfg).unwrap();
    let ps: Vec<f64> = out.rows.iter().map(|r| r.alpha_or_p).collect();
    assert_eq!(ps, [0.2, 0.2, 0.5, 0.5, 0.9, 0.9]);
    for pair in out.rows.chunks(2) {
        let (a, b) = (pair[0].j1, pair[1].j1);
        assert!(a == b || (a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

fn stmi() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stmi"))
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "kind = \"stmi-channel-sweep\"\n[sweep]\nchannel = \"dephasing\"\np = []\n").unwrap();
    let out = stmi().arg("run").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.toml:4:"), "{}", String::from_utf8_lossy(&out.stderr));

    let strict = dir.path().join("strict.toml");
    std::fs::write(&strict, "kind = \"stmi-channel-sweep\"\nstrict = true\n[optimizer]\nmax_iters = 2\nrestarts = 1\n[sweep]\nchannel = \"depolarizing\"\np = [0.4]\nmethod = \"variational\"\n").unwrap();
    let out = stmi().arg("run").arg(&strict).arg("--output").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(3));

    assert_eq!(stmi().args(["verify", "no-such-suite"]).output().unwrap().status.code(), Some(1));
    let out = stmi().args(["verify", "7"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("PASS 07"));
}

#[test]
fn manifest_records_run_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("m.toml");
    std::fs::write(&cfg, "kind = \"markov-check\"\nseed = 4\n[optimizer]\nrestarts = 2\n").unwrap();
    let out = stmi().arg("run").arg(&cfg).arg("--output").arg(dir.path().join("o")).env("STMI_WORKERS", "2").output().unwrap();
    assert!(out.status.success());
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("o/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["schema"], 1);
    assert_eq!(m["workers"], 2);
    assert_eq!(m["seeds"]["master"], 4);
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("o/report.json")).unwrap()).unwrap();
    assert_eq!(r["passed"], true);
}

fn shipped(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)).unwrap()
}

#[test]
fn depolarizing_sweep_decreases_to_zero() {
    let out = experiments::run(&shipped("depolarizing.toml")).unwrap();
    let j: Vec<f64> = out.rows.iter().map(|r| r.j1).collect();
    assert_eq!(j[0], f64::INFINITY);
    assert!(j.windows(2).all(|w| w[1] < w[0]), "{j:?}");
    assert!(j.last().unwrap().abs() < 1e-12);
}

#[test]
fn dephasing_plateau_at_full_noise() {
    let cfg = parse("kind = \"stmi-channel-sweep\"\n[sweep]\nchannel = \"dephasing\"\np = [0.9, 0.99, 1.0]\nepsilon = 0.01\n").unwrap();
    let out = experiments::run(&cfg).unwrap();
    let e = 0.01f64;
    // divergent part plus the bounded remainder -log(p(2 - p)/4) at p = 1
    let want = -2.0 * e.ln() + 4f64.ln();
    let last = out.rows.last().unwrap().j1;
    assert!((last - want).abs() < 1e-3, "{last} vs {want}");
    assert!(out.rows.windows(2).all(|w| (w[1].j1 - w[0].j1).abs() < 0.05));
}

#[test]
fn entangled_input_values() {
    let out = experiments::run(&shipped("appendix-c.toml")).unwrap();
    assert!(out.passed);
    let r = &out.report;
    let eps: Vec<f64> = serde_json::from_value(r["epsilons"].clone()).unwrap();
    let x_a: Vec<f64> = serde_json::from_value(r["x_a"].clone()).unwrap();
    let swap: Vec<f64> = serde_json::from_value(r["swap"].clone()).unwrap();
    for ((e, x), w) in eps.iter().zip(&x_a).zip(&swap) {
        // -log(e/4) up to O(e log e)
        let lead = -(e / 4.0).ln();
        assert!((x - lead).abs() < 2.0 * e * (1.0 - e.ln()), "eps {e}: {x} vs {lead}");
        assert!(w < x);
    }
    assert!((r["slope_ratio"].as_f64().unwrap() - 4.0 / 3.0).abs() < 0.1);
}
