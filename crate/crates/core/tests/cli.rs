use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pxlap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pxlap"))
        .args(args)
        .arg("--output-dir")
        .arg(dir.join("out"))
        .env("PXLAP_THREADS", "1")
        .output()
        .unwrap()
}

fn summary(dir: &Path, cmd: &str) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("out").join(format!("{cmd}.json"))).unwrap()).unwrap()
}

#[test]
fn eig_writes_summary_and_eigenfunction() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("eig.cfg");
    std::fs::write(&cfg, "mesh.n = 128\nproblem.p1 = 2\nproblem.p2 = 3\n").unwrap();
    let out = pxlap(dir.path(), &["eig", "-q", "-c", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path(), "eig");
    assert_eq!(s["status"], "ok");
    assert_eq!(s["effective_config"]["mesh"]["n"], 128);
    let lambda = s["result"]["lambda1"][0].as_f64().unwrap();
    assert!((lambda - std::f64::consts::PI.powi(2)).abs() < 1e-2, "{lambda}");
    assert!(dir.path().join("out/eig.meta.json").exists());
}

#[test]
fn misspelled_key_is_a_config_error_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "[mesh]\nn = 64\n\n[solver]\ntolerence = 1e-9\n").unwrap();
    let out = pxlap(dir.path(), &["solve", "-c", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("tolerence") && err.contains(":5"), "{err}");
}

#[test]
fn every_bad_value_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "mesh.n = -4\noutput.csv = maybe\nhomotopy.t_grid = 0, 0.5\n").unwrap();
    let out = pxlap(dir.path(), &["eig", "-c", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.lines().count() >= 3, "{err}");
}

#[test]
fn unknown_subcommand_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = pxlap(dir.path(), &["theorem3"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn solve_with_manufactured_solution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("solve.cfg");
    std::fs::write(&cfg, "[mesh]\nn = 64\n[problem]\np1 = 2 + x\nu = sin(pi*x)\n").unwrap();
    let out = pxlap(dir.path(), &["solve", "-q", "-c", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(summary(dir.path(), "solve")["status"], "ok");
}
