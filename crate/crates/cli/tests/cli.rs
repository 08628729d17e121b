//! End-to-end runs of the `betamm` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const MA: &str = r#"{"V1_prime": [0, 1], "V2_prime": [0, 0, 1], "T": 1, "N": 1,
                     "bethe": {"mode": "homotopy", "root_selection": [1]}}"#;

fn betamm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_betamm")).args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn solve_finds_the_ma_root() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "ma.json", MA);
    let out = betamm(&["solve", "--model", s(&model)]);
    assert_eq!(out.status.code(), Some(0));
    let doc = stdout_json(&out);
    assert_eq!(doc["solution"]["roots"], serde_json::json!([[1.0, 0.0]]));
    assert_eq!(doc["manifest"]["command"], "solve");
    assert_eq!(doc["manifest"]["model_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn missing_model_is_a_config_error() {
    let out = betamm(&["solve", "--model", "/nonexistent/model.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read"));
}

#[test]
fn unknown_keys_and_bad_flags_are_config_errors() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "bad.json", r#"{"V1_prime": [0, 1], "V2_prime": [0, 1], "T": 1, "N": 1, "beta": 2}"#);
    assert_eq!(betamm(&["solve", "--model", s(&model)]).status.code(), Some(1));
    let ma = write(&dir, "ma.json", MA);
    assert_eq!(betamm(&["verify", "--model", s(&ma), "--checks", "ode,nonsense"]).status.code(), Some(1));
    assert_eq!(betamm(&["solve"]).status.code(), Some(1));
}

#[test]
fn iteration_cap_is_a_solver_failure() {
    let dir = TempDir::new().unwrap();
    let model = write(
        &dir,
        "cubic.json",
        r#"{"V1_prime": [0, 1], "V2_prime": [0, 0, 0, 1], "T": 1, "N": 2,
            "bethe": {"root_selection": [0, 1], "max_iter": 1}}"#,
    );
    assert_eq!(betamm(&["solve", "--model", s(&model)]).status.code(), Some(2));
}

#[test]
fn verify_passes_on_ma_and_fails_under_perturbation() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "ma.json", MA);
    let out = betamm(&["verify", "--model", s(&model)]);
    assert_eq!(out.status.code(), Some(0));
    let doc = stdout_json(&out);
    assert_eq!(doc["report"]["all_pass"], true);
    assert_eq!(doc["report"]["checks"].as_array().unwrap().len(), 11);

    let out = betamm(&["verify", "--model", s(&model), "--perturb", "1e-2", "--checks", "compat"]);
    assert_eq!(out.status.code(), Some(3));
    let doc = stdout_json(&out);
    assert_eq!(doc["report"]["checks"][0]["name"], "compat");
    assert_eq!(doc["report"]["checks"][0]["pass"], false);
}

#[test]
fn check_subsets_run_only_the_named_checks() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "ma.json", MA);
    let doc = stdout_json(&betamm(&["verify", "--model", s(&model), "--checks", "ode,companion"]));
    let names: Vec<&str> = doc["report"]["checks"].as_array().unwrap().iter().map(|r| r["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["ode", "companion"]);
}

#[test]
fn reruns_write_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "ma.json", MA);
    let out = dir.path().join("report.json");
    let args = ["verify", "--model", s(&model), "--out", s(&out), "--seed", "7"];
    assert_eq!(betamm(&args).status.code(), Some(0));
    let first = std::fs::read(&out).unwrap();
    assert_eq!(betamm(&args).status.code(), Some(0));
    assert_eq!(first, std::fs::read(&out).unwrap());
}

#[test]
fn correlators_from_a_cached_solution() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "ma.json", MA);
    let sol = dir.path().join("sol.json");
    assert_eq!(betamm(&["solve", "--model", s(&model), "--out", s(&sol)]).status.code(), Some(0));
    let out = betamm(&["correlators", "--model", s(&model), "--cache", s(&sol), "--n", "0", "--g", "1", "--eval", "x=3"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = stdout_json(&out);
    // −1/(x−1)² + 2/(x−1)³ vanishes at x = 3.
    let w = &doc["result"]["evaluations"][0]["W"];
    assert!(w[0].as_f64().unwrap().abs() < 1e-14 && w[1].as_f64().unwrap().abs() < 1e-14);

    let other = write(&dir, "other.json", &MA.replace("\"T\": 1", "\"T\": 2"));
    let out = betamm(&["correlators", "--model", s(&other), "--cache", s(&sol), "--n", "0", "--g", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn free_energy_and_curve_for_ma() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "ma.json", MA);
    let doc = stdout_json(&betamm(&["free-energy", "--model", s(&model)]));
    let fe = &doc["result"]["free_energies"];
    assert_eq!(fe["det_H"], serde_json::json!([-1.0, 0.0]));
    assert!(fe["f1_reduced"][0].as_f64().unwrap().abs() < 1e-14);

    let doc = stdout_json(&betamm(&["curve", "--model", s(&model), "--eval", "2,3"]));
    assert_eq!(doc["result"]["evaluations"][0]["E"], serde_json::json!([-9.0, 0.0]));
}
