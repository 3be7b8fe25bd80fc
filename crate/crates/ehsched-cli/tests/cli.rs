//! Exit-code contract and file-format checks for the `ehsched` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ehsched"))
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ehsched-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

const UNIT: &str = r#"{
  "model": {"kind": "shannon", "bandwidth": 1.0, "noise_power": 1.0},
  "c_max": 1.0,
  "energy": [[0.0, 1.0]],
  "data": [[0.0, 1.0]],
  "qos": {"kind": "none"}
}"#;

const INFEASIBLE: &str = r#"{
  "model": {"kind": "shannon", "bandwidth": 1.0, "noise_power": 1.0},
  "c_max": 10.0,
  "energy": [[0.0, 1.0]],
  "data": [[0.0, 2.0]],
  "qos": {"kind": "explicit", "events": [[1.0, 2.0]]}
}"#;

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

#[test]
fn solve_known_scenario_exits_zero() {
    let dir = tmp_dir("solve");
    let path = write(&dir, "unit.json", UNIT);
    let out = run(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("T = 1.0"), "{text}");
}

#[test]
fn infeasible_scenario_exits_two_with_witness() {
    let dir = tmp_dir("infeasible");
    let path = write(&dir, "bad.json", INFEASIBLE);
    let out = run(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("infeasible"), "{text}");
    assert!(text.contains("t = 1"), "witness event missing: {text}");
}

#[test]
fn missing_file_exits_one() {
    let out = run(&["solve", "/nonexistent/nowhere.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_file_exits_one() {
    let dir = tmp_dir("malformed");
    let path = write(&dir, "broken.json", "{ this is not json");
    let out = run(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn validate_roundtrip_and_tamper() {
    let dir = tmp_dir("validate");
    let scenario = write(&dir, "unit.json", UNIT);
    let out = run(&["solve", scenario.to_str().unwrap(), "--output", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let sched_path = write(&dir, "sched.json", &String::from_utf8(out.stdout).unwrap());
    let out = run(&[
        "validate",
        scenario.to_str().unwrap(),
        sched_path.to_str().unwrap(),
        "--strict",
    ]);
    assert_eq!(out.status.code(), Some(0), "{:?}", out);

    // Shrink the completion time by 1%: a constraint check must fail and name itself.
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&sched_path).unwrap()).unwrap();
    let t = v["completion_time"].as_f64().unwrap();
    v["completion_time"] = serde_json::json!(t * 0.99);
    let tampered = write(&dir, "tampered.json", &v.to_string());
    let out = run(&[
        "validate",
        scenario.to_str().unwrap(),
        tampered.to_str().unwrap(),
    ]);
    assert_ne!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("FAIL"), "{text}");
}

#[test]
fn validate_rejects_schema_mismatch() {
    let dir = tmp_dir("schema");
    let scenario = write(&dir, "unit.json", UNIT);
    let not_a_schedule = write(&dir, "junk.json", r#"{"foo": 3}"#);
    let out = run(&[
        "validate",
        scenario.to_str().unwrap(),
        not_a_schedule.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn oracle_brackets_unit_case() {
    let dir = tmp_dir("oracle");
    let path = write(&dir, "unit.json", UNIT);
    let out = run(&["oracle", path.to_str().unwrap(), "--dt", "0.01"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let t: f64 = text
        .lines()
        .find(|l| l.starts_with("T_oracle"))
        .and_then(|l| l.split_whitespace().nth(2))
        .unwrap()
        .parse()
        .unwrap();
    assert!((1.0..=1.05).contains(&t), "T_oracle = {t}");
}

#[test]
fn oracle_rejects_misaligned_events() {
    let dir = tmp_dir("misaligned");
    let path = write(
        &dir,
        "off.json",
        r#"{
          "model": {"kind": "shannon", "bandwidth": 1.0, "noise_power": 1.0},
          "c_max": 1.0,
          "energy": [[0.0, 0.5], [0.3337, 0.5]],
          "data": [[0.0, 1.0]],
          "qos": {"kind": "none"}
        }"#,
    );
    let out = run(&["oracle", path.to_str().unwrap(), "--dt", "0.01"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn oracle_infeasible_exits_two() {
    let dir = tmp_dir("oracle-inf");
    let path = write(&dir, "bad.json", INFEASIBLE);
    let out = run(&["oracle", path.to_str().unwrap(), "--dt", "0.01"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_rejects_zero_trials() {
    let dir = tmp_dir("sim0");
    let out_path = dir.join("r.csv");
    let out = run(&[
        "simulate",
        "--trials",
        "0",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_writes_one_row_per_level() {
    let dir = tmp_dir("simrows");
    let out_path = dir.join("rows.csv");
    let out = run(&[
        "simulate",
        "--trials",
        "20",
        "--seed",
        "3",
        "--levels",
        "1.0,1.4,1.9",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().count(), 4); // header + 3 levels
}

#[test]
fn ebs_solver_selectable() {
    let dir = tmp_dir("ebs");
    let path = write(&dir, "unit.json", UNIT);
    let out = run(&["solve", path.to_str().unwrap(), "--solver", "ebs"]);
    assert_eq!(out.status.code(), Some(0));
}
