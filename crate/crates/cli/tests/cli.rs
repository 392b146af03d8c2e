use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_overfit-sim"));
    c.env_remove("OVERFIT_SIM_OUT").env("RUST_LOG", "error");
    c
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn error_body(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("an error line on stderr");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("{line}: {e}"))
}

const BILINEAR: &str =
    "kind = \"bilinear_check\"\nname = \"bl\"\nseed = 1\n\n[params]\ndt = 0.001\nrecord_every = 100\n";

#[test]
fn lists_every_experiment_kind() {
    let out = bin().arg("list-experiments").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 10);
    assert!(text.lines().any(|l| l.starts_with("predator_prey ")));
}

#[test]
fn validate_lists_defaults_and_hash() {
    let out = bin().arg("validate").arg(configs().join("pursuit.toml")).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("valid: "));
    assert!(text.contains("params.record_every = 100  [artifact default]"));
    assert!(text.lines().last().unwrap().starts_with("config hash "));
}

#[test]
fn invalid_config_exits_with_schema_status() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "bad.toml", &format!("{BILINEAR}omgea = 2.0\n"));
    for cmd in ["validate", "run"] {
        let out = bin().arg(cmd).arg(&p).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{cmd}");
        let body = error_body(&out);
        assert_eq!(body["error"], "config");
        assert_eq!(body["exit_code"], 2);
        assert!(body["message"].as_str().unwrap().contains("params.omgea"));
    }
}

#[test]
fn missing_config_exits_with_schema_status() {
    let out = bin().args(["run", "/nonexistent/cfg.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_body(&out)["stage"], "config");
}

#[test]
fn runtime_failure_exits_with_runtime_status() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("regression.toml")).unwrap();
    let p = write(dir.path(), "r.toml", &text.replace("../data/wine.csv", "absent.csv"));
    let out = bin().arg("run").arg(&p).arg("--out").arg(dir.path().join("out")).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let body = error_body(&out);
    assert_eq!(body["stage"], "run");
    assert_eq!(body["exit_code"], 3);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn run_writes_under_the_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "bl.toml", BILINEAR);
    let root = dir.path().join("env_root");
    let out = bin().arg("run").arg(&p).env("OVERFIT_SIM_OUT", &root).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let record: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(record["name"], "bl");
    for f in ["config.json", "summary.json", "trajectory.csv", "run_record.json"] {
        assert!(root.join("bl").join(f).is_file(), "missing {f}");
    }
    let flag = dir.path().join("flag_root");
    let out = bin().arg("run").arg(&p).arg("--out").arg(&flag).env("OVERFIT_SIM_OUT", &root).output().unwrap();
    assert!(out.status.success());
    let a = std::fs::read(root.join("bl/trajectory.csv")).unwrap();
    let b = std::fs::read(flag.join("bl/trajectory.csv")).unwrap();
    assert_eq!(a, b);
}
