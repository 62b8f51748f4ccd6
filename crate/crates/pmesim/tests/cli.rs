//! End-to-end tests of the `pmesim` binary: exit codes, emitted artifacts,
//! and config validation behavior.

use std::path::Path;
use std::process::{Command, Output};

fn pmesim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pmesim"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn run_heat_defaults_emits_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(pmesim()
        .arg("run")
        .args(["--scenario", "heat"])
        // shrink the run so the test stays fast; checks still apply
        .args(["--grid-n", "256", "--n-steps", "32", "--t-final", "0.25"])
        .arg("--out-dir")
        .arg(dir.path()));
    assert!(
        out.status.success(),
        "expected exit 0, got {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        stdout(&out),
        stderr(&out)
    );
    let text = stdout(&out);
    assert!(text.contains("PASS"), "no PASS lines in:\n{text}");
    assert!(!text.contains("FAIL"), "unexpected FAIL in:\n{text}");
    for name in [
        "pde_solution.csv",
        "diagnostics.csv",
        "summary.json",
        "manifest.json",
    ] {
        assert!(dir.path().join(name).is_file(), "missing artifact {name}");
    }
}

#[test]
fn run_rejects_unknown_scenario() {
    let out = run(pmesim().arg("run").args(["--scenario", "bogus"]));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bogus"));
}

#[test]
fn run_rejects_bad_override() {
    let out = run(pmesim()
        .arg("run")
        .args(["--scenario", "heat", "--grid-n", "0"]));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_config_prints_resolved_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    std::fs::write(
        &path,
        "[grid]\nn = 128\nhalf_width = 6.0\n\n[run]\nseed = 7\n",
    )
    .unwrap();
    let out = run(pmesim()
        .arg("validate-config")
        .arg("--config")
        .arg(&path)
        .args(["--scenario", "barenblatt"]));
    assert!(out.status.success(), "stderr:\n{}", stderr(&out));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["scenario"], "barenblatt");
    assert_eq!(json["grid_n"], 128);
    assert_eq!(json["seed"], 7);
}

#[test]
fn validate_config_reports_all_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.conf");
    std::fs::write(&path, "[grid]\nn = pony\n\n[pde]\nt_final = -1\n").unwrap();
    let out = run(pmesim().arg("validate-config").arg("--config").arg(&path));
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("grid.n"), "missing grid.n in:\n{err}");
    assert!(err.contains("t_final"), "missing t_final in:\n{err}");
}

#[test]
fn validate_config_missing_file_is_config_error() {
    let out = run(pmesim()
        .arg("validate-config")
        .args(["--config", "/nonexistent/run.conf"]));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical_across_processes() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [&dir_a, &dir_b] {
        let out = run(pmesim()
            .arg("run")
            .args(["--scenario", "heat"])
            .args(["--grid-n", "128", "--n-steps", "16", "--t-final", "0.125"])
            .arg("--out-dir")
            .arg(dir.path()));
        assert!(out.status.success(), "stderr:\n{}", stderr(&out));
    }
    let manifest = |p: &Path| std::fs::read(p.join("manifest.json")).unwrap();
    assert_eq!(manifest(dir_a.path()), manifest(dir_b.path()));
}
