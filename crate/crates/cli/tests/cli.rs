//! End-to-end checks of the `bgtc` binary: exit codes, staging behaviour and
//! config handling.

use std::path::Path;
use std::process::Command;

fn bgtc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bgtc"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.kv");
    std::fs::write(&path, body).unwrap();
    path
}

const GROUND_TRUTH_ONLY: &str = "schema = 1\n\
    synth.profiles =\n\
    circuit.presets =\n\
    experiment.approaches = ground_truth\n";

#[test]
fn all_subcommand_runs_ground_truth_to_completion() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), GROUND_TRUTH_ONLY);
    let out = dir.path().join("out");
    let status = bgtc()
        .args(["all", "--seed", "3"])
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("report.txt").exists());
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("ground_truth"), "report:\n{report}");
    assert!(report.contains("1.0000"), "report:\n{report}");
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "schema = 1\nbogus.key = 1\n");
    let output = bgtc()
        .args(["all"])
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("config error"), "stderr: {stderr}");
}

#[test]
fn missing_upstream_artifacts_exit_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    // `rates` without prior circuit output must fail and name the stage.
    let output = bgtc()
        .args(["rates"])
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("rates"), "stderr: {stderr}");
    assert!(stderr.contains("circuit"), "stderr: {stderr}");
}

#[test]
fn stages_compose_like_all() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), GROUND_TRUTH_ONLY);
    let out = dir.path().join("out");
    for stage in ["synth", "decide", "robot", "report"] {
        let status = bgtc()
            .args([stage, "--seed", "3"])
            .arg("--config")
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success(), "stage {stage} failed");
    }
    let report = std::fs::read_to_string(out.join("report.kv")).unwrap();
    assert!(report.contains("condition.ground_truth.correct = 1"));
}
