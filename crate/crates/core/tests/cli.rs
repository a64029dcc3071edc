//! Exit codes and outputs of the `gexp` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn gexp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gexp")).args(args).output().unwrap()
}

fn json_lines(out: &Output) -> Vec<serde_json::Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn converge_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("call.csv");
    let cfg = config("call_d1.cfg");
    let out = gexp(&[
        "converge",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), gexp_core::harness::CSV_HEADER);
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 7);
    for row in &rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 8);
        assert_eq!(fields[7], "", "runtime column stays empty without --timings");
    }
    let summary = &json_lines(&out)[0];
    assert_eq!(summary["rows"], 7);
    assert!(summary["sandwich_violations"].as_array().unwrap().is_empty());
}

#[test]
fn converge_reruns_are_byte_identical() {
    let cfg = config("call_d1.cfg");
    let run = || gexp(&["converge", "--config", cfg.to_str().unwrap(), "--n", "16"]).stdout;
    let first = run();
    assert!(!first.is_empty());
    assert_eq!(first, run());
}

#[test]
fn price_pde_square() {
    let cfg = config("square_d1.cfg");
    let out = gexp(&["price-pde", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_lines(&out)[0]["value"].as_f64().unwrap();
    assert!((v - 4.0).abs() <= 1e-4, "{v}");
}

#[test]
fn price_weak_and_strong_square() {
    let cfg = config("square_d1.cfg");
    for (cmd, key) in [("price-weak", "value"), ("price-strong", "strong_value")] {
        let out = gexp(&[cmd, "--config", cfg.to_str().unwrap(), "--n", "16", "--paths", "2000"]);
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let v = json_lines(&out)[0][key].as_f64().unwrap();
        assert!((v - 4.0).abs() <= 1e-9, "{cmd}: {v}");
    }
}

#[test]
fn validate_passes_on_declared_bounds() {
    let cfg = config("square_d1.cfg");
    let out = gexp(&["validate", "--config", cfg.to_str().unwrap(), "--n", "32", "--paths", "2000"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(json_lines(&out).iter().all(|l| l["passed"] == true));
}

#[test]
fn validate_fails_on_bound_mismatch() {
    let cfg = config("square_d2_paper.cfg");
    let out = gexp(&["validate", "--config", cfg.to_str().unwrap(), "--n", "8", "--bound-mode", "relaxed"]);
    assert_eq!(out.status.code(), Some(1));
    let lines = json_lines(&out);
    let strong = lines.iter().find(|l| l["law"] == "strong").unwrap();
    assert_eq!(strong["report"]["pointwise_bounds"]["passed"], false);
    assert!(strong["report"]["offending_path"].is_array());
}

#[test]
fn usage_errors_exit_with_two() {
    let cfg = config("square_d1.cfg");
    assert_eq!(gexp(&["converge", "--config", cfg.to_str().unwrap(), "--bogus"]).status.code(), Some(2));
    assert_eq!(gexp(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(gexp(&["price-weak", "--config", "/nonexistent.cfg"]).status.code(), Some(2));
    assert_eq!(
        gexp(&["price-weak", "--config", cfg.to_str().unwrap(), "--bound-mode", "loose"]).status.code(),
        Some(2)
    );
}

#[test]
fn malformed_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    std::fs::write(&path, "T = 1.0\nn_schedule = [4]\nunknown_key = 3\n").unwrap();
    assert_eq!(gexp(&["price-weak", "--config", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn help_and_version_exit_with_zero() {
    assert_eq!(gexp(&["--help"]).status.code(), Some(0));
    assert_eq!(gexp(&["--version"]).status.code(), Some(0));
}
