use std::io::Write;
use std::path::Path;
use std::process::Command;

use stmi_cli::suites;

/// Writes past the test harness capture so every line shows up in the log.
fn report(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

#[test]
fn all_criteria() {
    let mut failed = Vec::new();
    report("");
    for (id, name) in suites::names() {
        let outcome = suites::run(id).expect("listed suite");
        report(&outcome.summary());
        for c in &outcome.checks {
            report(&format!("    {} {}", if c.ok { "ok  " } else { "FAIL" }, c.what));
        }
        if !outcome.passed {
            failed.push(format!("{id:02} {name}"));
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

fn run_binary(config: &Path, dir: &Path) -> (Vec<u8>, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_stmi"))
        .arg("run")
        .arg(config)
        .arg("--output")
        .arg(dir)
        .env("STMI_WORKERS", "3")
        .output()
        .expect("spawn stmi");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (std::fs::read(dir.join("data.csv")).unwrap(), std::fs::read(dir.join("report.json")).unwrap())
}

#[test]
fn binary_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(&cfg, suites::DETERMINISM_CONFIG).unwrap();
    let a = run_binary(&cfg, &dir.path().join("a"));
    let b = run_binary(&cfg, &dir.path().join("b"));
    let same = a == b;
    report("");
    report(&format!("{} 15 determinism (binary, data.csv and report.json)", if same { "PASS" } else { "FAIL" }));
    assert!(same);
    assert!(String::from_utf8(a.0).unwrap().lines().count() > 1);
}
