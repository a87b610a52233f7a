//! Black-box checks of the command-line front end: exit codes, config
//! overrides, and on-disk artifacts.

use std::fs;
use std::path::Path;
use std::process::Command;

fn thermokit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_thermokit"))
}

/// Shared tiny-cohort overrides so CLI runs stay fast.
fn tiny_args(out: &Path) -> Vec<String> {
    [
        "--set",
        "input.healthy=6",
        "--set",
        "input.abnormal=6",
        "--set",
        "input.template.height=16",
        "--set",
        "input.template.width=16",
        "--set",
        "input.template.frames=12",
        "--set",
        r#"classifier.spec={"kind":"naive_bayes"}"#,
        "--set",
        "classifier.folds=2",
        "--set",
        "classifier.repeats=1",
        "--set",
        "features.levels=16",
        "--set",
        "features.spectral_d=2",
        "--set",
        "features.graph_k=4",
        "--out",
    ]
    .iter()
    .map(|s| s.to_string())
    .chain([out.display().to_string()])
    .collect()
}

#[test]
fn run_succeeds_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = thermokit()
        .arg("run")
        .args(tiny_args(&out))
        .args(["--seed", "5", "--jobs", "2"])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("report.json").is_file());
    assert!(out.join("manifest.json").is_file());
    assert!(out.join("features.csv").is_file());
    assert!(out.join("comparison.csv").exists() == false);
}

#[test]
fn config_file_plus_override() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let config_path = dir.path().join("cfg.json");
    fs::write(
        &config_path,
        r#"{
            "input": {"kind": "phantom_cohort", "healthy": 6, "abnormal": 6,
                      "template": {"height": 16, "width": 16, "frames": 12}},
            "classifier": {"spec": {"kind": "naive_bayes"}, "folds": 2, "repeats": 1},
            "features": {"levels": 16, "spectral_d": 2, "graph_k": 4},
            "master_seed": 9
        }"#,
    )
    .unwrap();
    let status = thermokit()
        .args(["run", "--config"])
        .arg(&config_path)
        .args(["--set", "apply_jse=false", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["apply_jse"], false);
    assert_eq!(manifest["config"]["master_seed"], 9);
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let status = thermokit()
        .arg("run")
        .args(["--set", "classifier.folds=1", "--out"])
        .arg(dir.path().join("x"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn stage_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = thermokit()
        .arg("run")
        .args(tiny_args(&out))
        .args(["--set", "factorization.config.p=0"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn phantom_then_run_on_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = dir.path().join("cohort");
    let status = thermokit()
        .args(["phantom", "--healthy", "6", "--abnormal", "6"])
        .args([
            "--set",
            "input.template.height=16",
            "--set",
            "input.template.width=16",
            "--set",
            "input.template.frames=12",
            "--out",
        ])
        .arg(&cohort)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(cohort.join("healthy").is_dir());
    assert_eq!(fs::read_dir(cohort.join("abnormal")).unwrap().count(), 6);

    let out = dir.path().join("run");
    let mut args = tiny_args(&out);
    args.extend([
        "--set".into(),
        format!(
            r#"input={{"kind":"directory","path":"{}"}}"#,
            cohort.display()
        ),
    ]);
    let status = thermokit().arg("run").args(args).status().unwrap();
    assert!(status.success());
}

#[test]
fn compare_single_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp");
    let status = thermokit()
        .arg("compare")
        .args(tiny_args(&out))
        .args(["--methods", "pct", "--embeddings", "weibull"])
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("pct,weibull,"));
}

#[test]
fn unknown_method_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let status = thermokit()
        .arg("compare")
        .args(tiny_args(&dir.path().join("cmp")))
        .args(["--methods", "eigenfish"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn jse_mc_writes_trials() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mc");
    let output = thermokit()
        .args(["jse-mc", "--p", "30", "--n", "6", "--trials", "20", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success());
    let aggregate: serde_json::Value = serde_json::from_slice(&output.stdout).unwrap();
    assert_eq!(aggregate["trials"], 20);
    assert_eq!(
        fs::read_to_string(out.join("trials.csv")).unwrap().lines().count(),
        21
    );
}
