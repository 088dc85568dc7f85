use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn badapprox(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_badapprox"));
    c.args(args).env_remove("BADAPPROX_OUT");
    c
}

fn run(args: &[&str]) -> Output {
    badapprox(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn certificate(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("certificate.json")).unwrap()).unwrap()
}

#[test]
fn certify_golden_convergent() {
    let o = run(&["certify", "--y", "987/1597", "--weights", "1", "--Q", "1000"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("610/1597"), "{}", stdout(&o));
}

#[test]
fn missing_weights_is_a_usage_error() {
    let o = run(&["certify", "--y", "1/3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[usage]"));
}

#[test]
fn json_errors_go_to_stderr() {
    let o = run(&["--json", "certify", "--y", "1/3"]);
    let v: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(v["error"]["kind"], "usage");
}

#[test]
fn construct_report_and_force() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let args = ["--out", out, "construct", "--q-max", "4", "--name", "small"];
    let first = run(&args);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let dir = tmp.path().join("small");
    assert_eq!(certificate(&dir)["depth"], 4);

    let report = run(&["report", dir.to_str().unwrap()]);
    assert_eq!(report.status.code(), Some(0), "{}", stdout(&report));

    let again = run(&args);
    assert_eq!(again.status.code(), Some(2));
    let forced = run(&["--force", "--out", out, "construct", "--q-max", "4", "--name", "small"]);
    assert_eq!(forced.status.code(), Some(0));
}

#[test]
fn output_root_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = badapprox(&["construct", "--q-max", "3", "--name", "env"]).env("BADAPPROX_OUT", tmp.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(tmp.path().join("env").join("certificate.json").is_file());
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    let body = serde_json::json!({ "output": tmp.path(), "construct": { "q_max": 3, "name": "cfg" } });
    std::fs::write(&cfg, body.to_string()).unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "construct", "--q-max", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(certificate(&tmp.path().join("cfg"))["depth"], 4);
}

#[test]
fn unknown_config_field_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    std::fs::write(&cfg, r#"{"construct": {"depth": 3}}"#).unwrap();
    let o = run(&["--config", cfg.to_str().unwrap(), "construct"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn empty_sweep_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.json");
    std::fs::write(&cfg, r#"{"sweep": {"R": []}}"#).unwrap();
    let o = run(&["--json", "--config", cfg.to_str().unwrap(), "sweep"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("grid is empty"), "{}", stdout(&o));
}

#[test]
fn small_base_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["--out", tmp.path().to_str().unwrap(), "construct", "--R", "3"]);
    assert_eq!(o.status.code(), Some(1));
}
