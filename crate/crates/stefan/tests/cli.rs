//! End-to-end tests of the command-line binary: exit codes, emitted files,
//! CSV schema, and byte-level determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stefan(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stefan"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary should launch")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout should be UTF-8")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

/// The binary-cosine scenario used throughout: n = 2, D = 1, cosine profile.
fn cosine_config(output: &str, extra: &str) -> String {
    format!(
        r#"# binary cosine scenario
model = "classic-ms"
n = 2
d = [1.0]
cells = 64
length = 1.0
dt_init = 1e-6
t_end = 0.05
snapshot_stride = 20
profile = "cosine"
base = [0.5, 0.5]
amplitude = [0.1, -0.1]
mode = 1
output = "{output}"
{extra}
"#
    )
}

#[test]
fn verify_runs_all_suites_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = stefan(&["verify"], dir.path());
    let text = stdout_of(&out);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    for suite in [
        "spectral",
        "bott-duffin-oracle",
        "pointwise-bounds",
        "reciprocal-eigenvalue",
        "velocity-bound",
        "dissipation-lower-bound",
    ] {
        assert!(text.contains(suite), "missing suite {suite} in:\n{text}");
    }
    assert!(text.contains("verification: PASS"), "unexpected summary:\n{text}");
}

#[test]
fn verify_filter_runs_one_suite() {
    let dir = tempfile::tempdir().unwrap();
    let out = stefan(&["verify", "--suite", "spectral"], dir.path());
    let text = stdout_of(&out);
    assert_eq!(out.status.code(), Some(0));
    assert!(text.contains("spectral"));
    assert!(!text.contains("velocity-bound"));
}

#[test]
fn verify_unknown_suite_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = stefan(&["verify", "--suite", "nonsense"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_detects_injected_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let out = stefan(&["verify", "--mutant-distortion", "1.0"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout_of(&out).contains("FAIL"));
}

#[test]
fn run_emits_schema_csv_with_monotone_entropy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", &cosine_config("out.csv", ""));
    let out = stefan(&["run", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let csv = fs::read_to_string(dir.path().join("out.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,H,D,H_rel,rS_min,min_c,sum_dev,dt,mass_1,mass_2"
    );
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() >= 3, "expected several snapshot rows, got {}", rows.len());

    let mut prev_h = f64::INFINITY;
    for row in &rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 10);
        let h: f64 = fields[1].parse().unwrap();
        assert!(h <= prev_h + 1e-12, "entropy increased along the run");
        prev_h = h;
        assert!(fields[3].is_empty(), "H_rel must be empty without a reference");
    }
    assert!(!csv.contains('\r'), "CSV must use LF line endings");
}

#[test]
fn run_is_byte_identical_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_a = write_config(dir.path(), "a.toml", &cosine_config("a.csv", "seed = 7"));
    let cfg_b = write_config(dir.path(), "b.toml", &cosine_config("b.csv", "seed = 7"));
    assert_eq!(stefan(&["run", "--config", &cfg_a], dir.path()).status.code(), Some(0));
    assert_eq!(stefan(&["run", "--config", &cfg_b], dir.path()).status.code(), Some(0));
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    let b = fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b, "identical configs must produce identical bytes");
}

#[test]
fn run_against_itself_zeroes_relative_entropy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", &cosine_config("out.csv", ""));
    let reference = write_config(dir.path(), "ref.toml", &cosine_config("ref.csv", ""));
    let out = stefan(&["run", "--config", &cfg, "--reference", &reference], dir.path());
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out.csv")).unwrap();
    for row in csv.lines().skip(1) {
        let h_rel: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
        assert_eq!(h_rel, 0.0, "self-referenced H_rel must be exactly zero");
    }
}

#[test]
fn run_with_zero_horizon_emits_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let body = cosine_config("out.csv", "").replace("t_end = 0.05", "t_end = 0.0");
    let cfg = write_config(dir.path(), "run.toml", &body);
    let out = stefan(&["run", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("out.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2, "header plus exactly one data row");
}

#[test]
fn config_errors_are_usage_class() {
    let dir = tempfile::tempdir().unwrap();
    // Missing required parameter.
    let no_gamma = write_config(
        dir.path(),
        "no_gamma.toml",
        &cosine_config("x.csv", "").replace("\"classic-ms\"", "\"porous-medium\""),
    );
    assert_eq!(stefan(&["run", "--config", &no_gamma], dir.path()).status.code(), Some(2));
    // Unknown key.
    let typo = write_config(dir.path(), "typo.toml", &cosine_config("x.csv", "tend = 1.0"));
    assert_eq!(stefan(&["run", "--config", &typo], dir.path()).status.code(), Some(2));
    // Wrong coefficient count.
    let bad_d = write_config(
        dir.path(),
        "bad_d.toml",
        &cosine_config("x.csv", "").replace("d = [1.0]", "d = [1.0, 2.0]"),
    );
    assert_eq!(stefan(&["run", "--config", &bad_d], dir.path()).status.code(), Some(2));
    // Missing file is an I/O failure, not a usage error.
    assert_eq!(stefan(&["run", "--config", "absent.toml"], dir.path()).status.code(), Some(1));
}

#[test]
fn incompatible_reference_is_usage_class() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", &cosine_config("out.csv", ""));
    let coarser = cosine_config("ref.csv", "").replace("cells = 64", "cells = 32");
    let reference = write_config(dir.path(), "ref.toml", &coarser);
    let out = stefan(&["run", "--config", &cfg, "--reference", &reference], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tumor_run_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
model = "tumor"
n = 3
beta = 1.0
theta = 1.0
cells = 16
length = 1.0
dt_init = 1e-6
t_end = 0.01
output = "out.csv"
profile = "uniform"
base = [0.4, 0.3, 0.3]
"#;
    let cfg = write_config(dir.path(), "tumor.toml", body);
    let out = stefan(&["run", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1), "tumor is audit-only");
}

#[test]
fn sweep_emits_report_and_run_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sweep.toml", &cosine_config("sweep.csv", ""));
    let out = stefan(
        &["sweep", "--config", &cfg, "--epsilons", "1e-2,5e-3,2.5e-3"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let report = fs::read_to_string(dir.path().join("sweep-report.txt")).unwrap();
    assert!(report.contains("fitted_order = "));
    let order: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("fitted_order = "))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!((order - 2.0).abs() < 0.1, "fitted order {order} not near 2");
    assert!(report.contains("sup_ratio = "));

    assert!(dir.path().join("sweep-reference.csv").exists());
    for idx in 0..3 {
        let run = fs::read_to_string(dir.path().join(format!("sweep-eps{idx}.csv"))).unwrap();
        for row in run.lines().skip(1) {
            let h_rel = row.split(',').nth(3).unwrap();
            assert!(!h_rel.is_empty(), "sweep runs must carry H_rel");
            assert!(h_rel.parse::<f64>().unwrap().is_finite());
        }
    }
}

#[test]
fn sweep_epsilon_families_are_validated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sweep.toml", &cosine_config("sweep.csv", ""));
    let single = stefan(&["sweep", "--config", &cfg, "--epsilons", "1e-2"], dir.path());
    assert_eq!(single.status.code(), Some(2));
    let skewed = stefan(
        &["sweep", "--config", &cfg, "--epsilons", "1e-2,5e-3,3e-3"],
        dir.path(),
    );
    assert_eq!(skewed.status.code(), Some(2));
}

#[test]
fn audit_reports_pass_for_each_model() {
    let dir = tempfile::tempdir().unwrap();
    let classic = stefan(&["audit", "classic-ms"], dir.path());
    assert_eq!(classic.status.code(), Some(0));
    assert!(stdout_of(&classic).contains("audit: PASS"));

    let porous = stefan(
        &["audit", "porous-medium", "--gamma", "2.0"],
        dir.path(),
    );
    assert_eq!(porous.status.code(), Some(0));
    assert!(stdout_of(&porous).contains("audit: PASS"));

    let tumor = stefan(
        &["audit", "tumor", "--beta", "1.0", "--theta", "1.0"],
        dir.path(),
    );
    assert_eq!(tumor.status.code(), Some(0));
    let text = stdout_of(&tumor);
    assert!(text.contains("expected: asymmetric coupling"), "missing note:\n{text}");
    assert!(text.contains("audit: PASS"));

    let unknown = stefan(&["audit", "unknown"], dir.path());
    assert_eq!(unknown.status.code(), Some(2));
}
