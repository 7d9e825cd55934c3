//! Invalid specifications fail with a line number, and `check` reports the
//! standard potentials correctly.

use std::path::Path;

use pathgibbs::config::ExperimentSpec;
use pathgibbs::runner::cmd_check;

const BASE: &str = r#"[potential]
kind = "nelson"

[grid]
T = 8.0
dt = 0.25
d = 1

[sampler]
lambda = [0.0, 0.1]
sweeps = 200
seeds = [1]
rho = 0.5
block = 4

[analysis]
estimators = ["diffusion"]
require = ["h1", "h2", "h4"]
interval = [-1.0, 1.0]
block_len = 1.0
direction = [1.0]
epsilons = [0.25]
"#;

fn parse(text: &str) -> pathgibbs::Result<ExperimentSpec> {
    ExperimentSpec::parse(text, Path::new("."))
}

#[test]
fn base_fixture_parses() {
    parse(BASE).unwrap();
}

#[test]
fn invalid_fixtures_name_the_offending_line() {
    // (original line, replacement, expected line, message fragment)
    let cases = [
        ("dt = 0.25", "dt = 0.0", 6, "dt must be positive"),
        ("T = 8.0", "T = -1.0", 5, "T must be positive"),
        ("kind = \"nelson\"", "kind = \"coulomb\"", 2, "unknown potential kind 'coulomb'"),
        ("kind = \"nelson\"", "kind = \"powerlaw\"\nc = 1.0", 2, "needs the key 'p'"),
        ("d = 1", "d = 0", 7, "at least 1"),
        ("lambda = [0.0, 0.1]", "lambda = []", 10, "lambda list is empty"),
        ("seeds = [1]", "seeds = []", 12, "seed list is empty"),
        ("rho = 0.5", "rho = 1.5", 13, "rho must lie in (0, 1)"),
        ("block = 4", "block = 1000", 14, "exceeds the 64 grid steps"),
        ("estimators = [\"diffusion\"]", "estimators = [\"entropy\"]", 17, "unknown estimator 'entropy'"),
        ("require = [\"h1\", \"h2\", \"h4\"]", "require = [\"h9\"]", 18, "unknown condition 'h9'"),
        ("interval = [-1.0, 1.0]", "interval = [1.0, -1.0]", 19, "a < b"),
        ("block_len = 1.0", "block_len = 0.3", 20, "multiple of dt"),
        ("direction = [1.0]", "direction = [0.0]", 21, "non-zero vector"),
        ("epsilons = [0.25]", "epsilons = [-0.25]", 22, "epsilons must be positive"),
        ("sweeps = 200", "sweeps = 200\ncolour = 3", 12, "colour"),
    ];
    let mut seen = std::collections::HashSet::new();
    for (from, to, line, fragment) in cases {
        assert!(BASE.contains(from), "fixture line {from}");
        let err = parse(&BASE.replacen(from, to, 1)).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let msg = err.to_string();
        assert!(msg.contains(&format!("line {line}:")), "{to}: {msg}");
        assert!(msg.contains(fragment), "{to}: {msg}");
        assert!(seen.insert(msg.clone()), "duplicate message {msg}");
    }
}

#[test]
fn missing_sections_are_reported() {
    let no_grid = BASE.replace("[grid]\nT = 8.0\ndt = 0.25\nd = 1\n", "");
    assert!(parse(&no_grid).unwrap_err().to_string().contains("missing [grid]"));
    let no_sampler: String = BASE.split("[sampler]").next().unwrap().to_string();
    assert!(parse(&no_sampler).unwrap_err().to_string().contains("missing [sampler]"));
}

#[test]
fn missing_spec_file_is_missing_input() {
    let err = ExperimentSpec::from_file(Path::new("/nonexistent/spec.toml")).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

fn check_spec(potential: &str, require: &str) -> String {
    BASE.replace("kind = \"nelson\"", potential)
        .replace("require = [\"h1\", \"h2\", \"h4\"]", require)
        .replace("estimators = [\"diffusion\"]", "estimators = [\"conditions\"]")
}

#[test]
fn nelson_satisfies_uniqueness_decay_but_not_strong_decay() {
    let dir = tempfile::tempdir().unwrap();
    let spec = parse(&check_spec("kind = \"nelson\"", "require = [\"h4\"]")).unwrap();
    let out = cmd_check(&spec, dir.path()).unwrap();
    assert!(out.required_hold);
    assert!(out.report.as_ref().unwrap().h4.holds.holds());
    assert!(!out.report.as_ref().unwrap().h3b.holds.holds());
    assert!((out.report.as_ref().unwrap().h4.alpha_fit - 4.0).abs() < 0.1);
    assert!(dir.path().join("conditions.json").exists());

    let strict = parse(&check_spec("kind = \"nelson\"", "require = [\"h3b\"]")).unwrap();
    assert!(!cmd_check(&strict, dir.path()).unwrap().required_hold);
}

#[test]
fn quartic_powerlaw_satisfies_h3() {
    let dir = tempfile::tempdir().unwrap();
    let spec = parse(&check_spec("kind = \"powerlaw\"\nc = 1.0\np = 2.0", "require = [\"h3\"]")).unwrap();
    let out = cmd_check(&spec, dir.path()).unwrap();
    assert!(out.required_hold && out.report.as_ref().unwrap().h3.holds.holds());
}

#[test]
fn empty_analysis_block_checks_nothing_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let text = BASE.split("[analysis]").next().unwrap().to_string() + "[analysis]\n";
    let spec = parse(&text).unwrap();
    assert!(spec.analysis.is_empty());
    let out = cmd_check(&spec, dir.path()).unwrap();
    assert!(out.required_hold);
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}
