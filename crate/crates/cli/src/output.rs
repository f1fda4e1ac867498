//! Output directory layout: `data.csv`, `report.json`, `manifest.json`.
//!
//! `data.csv` and `report.json` depend only on the configuration; timings and
//! worker counts live in the manifest. Non-finite numbers in the JSON files
//! are written as `null`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::experiments::{Row, RunOutput};

pub const SCHEMA_VERSION: u32 = 1;
pub const CSV_HEADER: [&str; 8] = ["t", "alpha_or_p", "seed", "method", "J1", "mi_term", "relent_term", "converged"];

/// Shortest round-tripping decimal, with `inf`/`-inf`/`nan` spelled out.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

fn write_csv(path: &Path, rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.t.map(format_float).unwrap_or_default(),
            format_float(r.alpha_or_p),
            r.seed.to_string(),
            r.method.clone(),
            format_float(r.j1),
            format_float(r.mi_term),
            format_float(r.relent_term),
            r.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

/// Writes all three files into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, out: &RunOutput, wall: Duration, workers: usize) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let data = dir.join("data.csv");
    let report = dir.join("report.json");
    let manifest = dir.join("manifest.json");
    write_csv(&data, &out.rows)?;

    let mut body = out.report.clone();
    body["schema"] = json!(SCHEMA_VERSION);
    body["passed"] = json!(out.passed);
    body["all_converged"] = json!(out.all_converged());
    write_json(&report, &body)?;

    let m = json!({
        "schema": SCHEMA_VERSION,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "seeds": { "master": cfg.seed, "optimizer": cfg.optimizer.seed, "classical": cfg.classical_optimizer.seed },
        "wall_time_s": wall.as_secs_f64(),
        "workers": workers,
        "outputs": ["data.csv", "report.json", "manifest.json"],
    });
    write_json(&manifest, &m)?;
    Ok(vec![data, report, manifest])
}
