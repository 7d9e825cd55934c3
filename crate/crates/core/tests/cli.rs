//! End-to-end runs of the `pathgibbs` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

const SMOKE: &str = r#"[potential]
kind = "nelson"

[grid]
T = 4.0
dt = 0.25

[sampler]
lambda = [0.0, 0.1]
sweeps = 1000
seeds = [7]

[analysis]
estimators = ["diffusion", "certificate", "covariance", "dobrushin"]
require = ["h1", "h2", "h4"]
"#;

fn bin(args: &[&str], spec: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pathgibbs"));
    cmd.args(args).arg("--out").arg(out);
    if let Some(s) = spec {
        cmd.arg("--spec").arg(s);
    }
    cmd.output().unwrap()
}

fn write_spec(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("spec.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn task_dirs(run: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(run)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("task_"))
        .collect();
    v.sort();
    v
}

#[test]
fn smoke_run_finishes_quickly_and_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), SMOKE);
    let run = tmp.path().join("run");
    let t = Instant::now();
    let out = bin(&["all", "--threads", "1"], Some(&spec), &run);
    assert!(t.elapsed().as_secs_f64() < 10.0);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    // one sub-run per lambda
    assert_eq!(task_dirs(&run).len(), 2);
    let verdicts: serde_json::Value =
        serde_json::from_slice(&std::fs::read(run.join("verdicts.json")).unwrap()).unwrap();
    let list = verdicts.as_array().unwrap();
    assert!(!list.is_empty());
    assert!(list.iter().all(|v| v["passed"] == true), "{verdicts}");
    assert!(run.join("manifest.json").exists());
}

#[test]
fn analyze_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), SMOKE);
    let run = tmp.path().join("run");
    assert_eq!(bin(&["sample", "--threads", "1"], Some(&spec), &run).status.code(), Some(0));
    assert_eq!(bin(&["analyze"], None, &run).status.code(), Some(0));
    let first = std::fs::read(run.join("verdicts.json")).unwrap();
    assert_eq!(bin(&["analyze"], None, &run).status.code(), Some(0));
    assert_eq!(std::fs::read(run.join("verdicts.json")).unwrap(), first);
}

#[test]
fn single_threaded_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), &SMOKE.replace("sweeps = 1000", "sweeps = 200"));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        assert_eq!(bin(&["sample", "--threads", "1"], Some(&spec), dir).status.code(), Some(0));
    }
    for task in task_dirs(&a) {
        for f in ["samples/0000.csv", "diagnostics.csv"] {
            let (x, y) = (a.join(&task).join(f), b.join(&task).join(f));
            assert_eq!(std::fs::read(&x).unwrap(), std::fs::read(&y).unwrap(), "{}", x.display());
        }
    }
}

#[test]
fn exit_codes_follow_the_error_class() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("run");

    let bad = write_spec(tmp.path(), &SMOKE.replace("dt = 0.25", "dt = -1"));
    let out = bin(&["check"], Some(&bad), &run);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 6:"));

    assert_eq!(bin(&["sample", "--threads", "0"], Some(&bad), &run).status.code(), Some(2));
    assert_eq!(bin(&["analyze"], None, &tmp.path().join("absent")).status.code(), Some(3));
    assert_eq!(bin(&["check"], Some(&tmp.path().join("absent.toml")), &run).status.code(), Some(3));
}

#[test]
fn failed_requirements_gate_sampling() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = write_spec(tmp.path(), &SMOKE.replace("\"h4\"]", "\"h3b\"]"));
    let run = tmp.path().join("run");
    assert_eq!(bin(&["check"], Some(&spec), &run).status.code(), Some(1));
    assert_eq!(bin(&["sample"], Some(&spec), &tmp.path().join("s")).status.code(), Some(4));
    assert!(!tmp.path().join("s").exists());
    assert_eq!(bin(&["sample", "--force"], Some(&spec), &tmp.path().join("s")).status.code(), Some(0));
}
