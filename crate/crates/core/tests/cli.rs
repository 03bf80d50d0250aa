use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn codiffsp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_codiffsp")).args(args).output().expect("spawn")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn write_instance(dir: &Path, name: &str, extra: &[&str]) -> String {
    let path = dir.join(name).to_string_lossy().into_owned();
    let mut args = vec!["generate", "--seed", "4", "--d", "1", "--m", "2", "--S", "2", "--l", "1", "-o", &path];
    args.extend_from_slice(extra);
    let out = codiffsp(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn solve_then_certify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let prob = write_instance(dir.path(), "p.json", &["--smooth"]);
    let report = dir.path().join("r.json").to_string_lossy().into_owned();
    let out = codiffsp(&["solve", "-i", &prob, "--solver", "cd", "--escalate", "-o", &report]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let c = rep["c"].as_f64().unwrap().to_string();

    let cert = codiffsp(&["certify", "-i", &prob, "--point", &report, "--c", &c]);
    assert_eq!(cert.status.code(), Some(0), "{}", String::from_utf8_lossy(&cert.stderr));
    let cert = json(&cert);
    assert!(cert["lambdas"].is_array());

    let eval = codiffsp(&["eval", "-i", &prob, "--point", &report, "--c", &c]);
    assert_eq!(eval.status.code(), Some(0));
    let eval = json(&eval);
    assert_eq!(eval["feasible"], Value::Bool(true));
    let phi = rep["final_value"].as_f64().unwrap();
    assert!((eval["penalty_value"].as_f64().unwrap() - phi).abs() <= 1e-9 * (1.0 + phi.abs()));
}

#[test]
fn outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let prob = write_instance(dir.path(), "p.json", &["--dc"]);
    let a = codiffsp(&["solve", "-i", &prob, "--solver", "dca"]);
    let b = codiffsp(&["solve", "-i", &prob, "--solver", "dca"]);
    assert_eq!(a.stdout, b.stdout);
    let n1 = codiffsp(&["check-nondeg", "-i", &prob, "--samples", "50", "--seed", "9"]);
    let n2 = codiffsp(&["check-nondeg", "-i", &prob, "--samples", "50", "--seed", "9"]);
    assert_eq!(n1.status.code(), Some(0));
    assert_eq!(n1.stdout, n2.stdout);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(codiffsp(&[]).status.code(), Some(2));
    assert_eq!(codiffsp(&["solve"]).status.code(), Some(2));
    assert_eq!(codiffsp(&["solve", "-i", "/nonexistent/p.json"]).status.code(), Some(2));
    assert_eq!(codiffsp(&["--help"]).status.code(), Some(0));
}

#[test]
fn invalid_inputs_report_their_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let out = codiffsp(&["solve", "-i", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("PARSE"));

    let prob = write_instance(dir.path(), "p.json", &[]);
    let out = codiffsp(&["solve", "-i", &prob, "--penalty", "dist"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("INVALID_VALUE"));

    let out = codiffsp(&["solve", "-i", &prob, "--c", "-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn iteration_cap_exits_with_three_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let prob = write_instance(dir.path(), "p.json", &[]);
    let out = codiffsp(&["solve", "-i", &prob, "--solver", "cd", "--max-iter", "1"]);
    assert_eq!(out.status.code(), Some(3));
    let rep = json(&out);
    assert!(rep["final_point"].is_object());
}

#[test]
fn selftest_passes() {
    let out = codiffsp(&["selftest"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}
