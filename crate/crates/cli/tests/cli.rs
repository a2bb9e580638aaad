use std::process::Command as Process;

use mfgl_cli::acceptance::small_config;
use mfgl_cli::{run, CliError, Command};

fn mfgl() -> Process {
    Process::new(env!("CARGO_BIN_EXE_mfgl"))
}

#[test]
fn invalid_parameter_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[model]\nnu = -1.0\n").unwrap();
    let out = mfgl()
        .args(["--config", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap(), "stationary"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nu"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.toml");
    std::fs::write(&cfg, "[grid]\nn_wealht = 10\n").unwrap();
    let out = mfgl()
        .args(["--config", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap(), "mrp"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn binary_writes_manifest_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = mfgl()
        .args(["--seed", "3", "--out-dir", dir.path().to_str().unwrap(), "discrete-master"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run_dir = dir.path().join("discrete-master");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "complete");
    assert_eq!(manifest["seed"], 3);
    assert!(run_dir.join("config.toml").exists());
    assert!(std::fs::read_dir(&run_dir)
        .unwrap()
        .any(|e| e.unwrap().path().extension().is_some_and(|x| x == "csv")));
}

#[test]
fn runner_is_repeatable() {
    let cfg = small_config();
    let root = tempfile::tempdir().unwrap();
    let a = root.path().join("a");
    let b = root.path().join("b");
    run(Command::Mrp, &cfg, &a, 1).unwrap();
    run(Command::Mrp, &cfg, &b, 1).unwrap();
    for entry in std::fs::read_dir(&a).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|x| x == "csv") {
            let other = b.join(path.file_name().unwrap());
            assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(other).unwrap());
        }
    }
}

#[test]
fn failed_run_marks_manifest_incomplete() {
    let mut cfg = small_config();
    cfg.transition.max_iter = 1;
    let dir = tempfile::tempdir().unwrap();
    let err = run(Command::Transition, &cfg, dir.path(), 1).unwrap_err();
    assert!(matches!(err, CliError::Convergence(_)), "{err}");
    assert_eq!(err.exit_code(), 3);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "incomplete");
}
