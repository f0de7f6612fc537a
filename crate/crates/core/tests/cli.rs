use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

const DEMO: &str = include_str!("../fixtures/demo.json");

fn destimate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_destimate")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write_scenario(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v: Value = serde_json::from_str(DEMO).unwrap();
    edit(&mut v);
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_scenario(dir.path(), "good.json", |_| {});
    let o = destimate(&["analyze", s(&good)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let o = destimate(&["--json", "analyze", s(&good)]);
    let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["n1"].as_u64().unwrap() + rep["n2"].as_u64().unwrap(), 5);
    assert_eq!(rep["ok"], true);

    let one_sensor = write_scenario(dir.path(), "one.json", |v| {
        v["plant"]["sensors"].as_array_mut().unwrap().truncate(1);
        v["graph"]["adjacency"] = json!([[0]]);
        v["simulation"]["w0"] = Value::Null;
    });
    let o = destimate(&["analyze", s(&one_sensor)]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));

    let no_sensors = write_scenario(dir.path(), "none.json", |v| v["plant"]["sensors"] = json!([]));
    assert_eq!(code(&destimate(&["analyze", s(&no_sensors)])), 2);

    let missing = dir.path().join("missing.json");
    assert_eq!(code(&destimate(&["analyze", s(&missing)])), 2);
    assert_eq!(code(&destimate(&["analyze"])), 2);
    assert_eq!(code(&destimate(&["--help"])), 0);
}

#[test]
fn unbalanced_directed_graph_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let three = write_scenario(dir.path(), "chain.json", |v| {
        let c = v["plant"]["sensors"][1].clone();
        v["plant"]["sensors"].as_array_mut().unwrap().push(c);
        v["graph"]["adjacency"] = json!([[0, 1, 0], [0, 0, 1], [0, 0, 0]]);
        v["simulation"]["w0"] = Value::Null;
    });
    let o = destimate(&["analyze", s(&three)]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    let est = dir.path().join("est.json");
    let o = destimate(&["synthesize", s(&three), "--out", s(&est)]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!est.exists());
}

#[test]
fn synthesize_is_deterministic_and_simulates() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_scenario(dir.path(), "sc.json", |_| {});
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    assert_eq!(code(&destimate(&["synthesize", s(&sc), "--out", s(&a)])), 0);
    assert_eq!(code(&destimate(&["synthesize", s(&sc), "--out", s(&b)])), 0);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let trace = dir.path().join("run.csv");
    let o = destimate(&["simulate", s(&sc), s(&a), "--out", s(&trace), "--dt", "0.01"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&trace).unwrap();
    assert_eq!(csv.lines().count(), 1002);
    assert!(dir.path().join("run.metrics.json").exists());
    assert!(dir.path().join("run.e1.dat").exists());
    assert!(dir.path().join("run.e2.dat").exists());

    let short = dir.path().join("short.csv");
    let o = destimate(&["simulate", s(&sc), s(&a), "--out", s(&short), "--t-end", "0.01"]);
    assert_eq!(code(&o), 1);
    assert!(short.exists());
}

#[test]
fn mismatched_estimator_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_scenario(dir.path(), "sc.json", |_| {});
    let est = dir.path().join("est.json");
    assert_eq!(code(&destimate(&["synthesize", s(&sc), "--out", s(&est)])), 0);
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&est).unwrap()).unwrap();
    v["nodes"].as_array_mut().unwrap().pop();
    fs::write(&est, v.to_string()).unwrap();
    let o = destimate(&["simulate", s(&sc), s(&est), "--out", s(&dir.path().join("t.csv"))]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn demo_with_reference_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let o = destimate(&["--json", "demo", "--gamma", "66", "--dt", "0.01", "--out", s(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["synthesis"]["gamma_used"], 66.0);
    assert_eq!(rep["metrics"]["all_converged"], true);
    assert!(fs::read_dir(dir.path()).unwrap().count() >= 3);
}
