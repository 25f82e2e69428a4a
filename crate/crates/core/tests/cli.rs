use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn rmab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmab")).args(args).output().expect("binary runs")
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn error_kind(out: &Output) -> String {
    assert!(!out.status.success());
    let v: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    v["error"]["kind"].as_str().expect("error kind").to_string()
}

/// A small single-MDP config written into `dir`.
fn small_config(dir: &Path) -> PathBuf {
    let mut cfg: Value = serde_json::from_str(include_str!("../presets/desk-ci.json")).unwrap();
    cfg["experiment"] = "cli-small".into();
    cfg["hyper"]["t_max"] = 250.into();
    cfg["hyper"]["k_max"] = 4.into();
    cfg["seeds"] = serde_json::json!([3, 4]);
    cfg["output_dir"] = "results".into();
    let path = dir.join("small.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

#[test]
fn validate_reports_dimensions() {
    let v = stdout_json(&rmab(&["validate", &fixture("five_state.json")]));
    assert_eq!(v["valid"], true);
    assert_eq!(v["states"], 5);
    assert_eq!(v["actions"], 2);
}

#[test]
fn invalid_fixture_is_a_machine_readable_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let mut mdp: Value = serde_json::from_str(&std::fs::read_to_string(fixture("five_state.json")).unwrap()).unwrap();
    mdp["transition"][0][0][0] = 0.9.into();
    std::fs::write(&bad, mdp.to_string()).unwrap();
    assert_eq!(error_kind(&rmab(&["validate", bad.to_str().unwrap()])), "invalid-model");
    assert_eq!(error_kind(&rmab(&["validate", "/definitely/missing.json"])), "io");
    assert_eq!(error_kind(&rmab(&["frobnicate"])), "usage");
}

#[test]
fn solve_and_index_agree_with_the_library() {
    let f = fixture("five_state.json");
    let solved = stdout_json(&rmab(&["solve", &f, "--lambda", "-0.25"]));
    assert_eq!(solved["subsidy"], -0.25);
    assert!(solved["residual"].as_f64().unwrap() <= 1e-10);
    let lib = rmab_learn::solve_q(&rmab_learn::five_state_example(), -0.25, 1e-10).unwrap();
    assert_eq!(solved["q"][2][1].as_f64().unwrap(), lib.q.get(2, 1));

    let index = stdout_json(&rmab(&["index", &f]));
    let lib = rmab_learn::whittle_indices(&rmab_learn::five_state_example(), 1e-8).unwrap();
    let got: Vec<f64> = index["index"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(got, lib.index);
}

#[test]
fn solve_writes_to_out_and_respects_force() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("q.json");
    let o = out.to_str().unwrap();
    let f = fixture("five_state.json");
    assert!(rmab(&["solve", &f, "--out", o]).status.success());
    assert_eq!(error_kind(&rmab(&["solve", &f, "--out", o])), "output-exists");
    assert!(rmab(&["solve", &f, "--out", o, "--force"]).status.success());
}

#[test]
fn learn_q_is_deterministic_and_refuses_to_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let c = cfg.to_str().unwrap();
    let summary = stdout_json(&rmab(&["learn-q", c]));
    let csv = PathBuf::from(summary["csv"].as_str().unwrap());
    assert_eq!(csv, dir.path().join("results").join("cli-small.csv"));
    let first = std::fs::read(&csv).unwrap();
    // Header plus config line, 2 algorithms × 2 seeds × 250 steps.
    assert_eq!(String::from_utf8_lossy(&first).lines().count(), 2 + 1000);

    assert_eq!(error_kind(&rmab(&["learn-q", c])), "output-exists");
    assert!(rmab(&["learn-q", c, "--force"]).status.success());
    assert_eq!(std::fs::read(&csv).unwrap(), first);

    let single = dir.path().join("single");
    let out = stdout_json(&rmab(&["learn-q", c, "--seed", "3", "--out", single.to_str().unwrap()]));
    let text = std::fs::read_to_string(out["csv"].as_str().unwrap()).unwrap();
    assert_eq!(text.lines().count(), 2 + 500);
    assert!(text.lines().skip(2).all(|l| l.split(',').nth(2) == Some("3")));
}

#[test]
fn learn_index_then_simulate_learned_indices() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let report = stdout_json(&rmab(&["learn-index", cfg.to_str().unwrap()]));
    assert_eq!(report["runs"].as_array().unwrap().len(), 4);
    let indices = report["indices"].as_str().unwrap();

    let out = rmab(&[
        "simulate",
        &fixture("five_arms.json"),
        indices,
        "--replications",
        "40",
        "--seed",
        "1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let policies: Vec<&str> = text.lines().skip(2).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(policies, vec!["learned:ql-eps-greedy", "learned:phaseql-ucb", "oracle", "random"]);
    assert_eq!(text.lines().nth(1), Some("policy,mean,half_width,seeds"));
}

#[test]
fn simulate_rejects_bad_inputs() {
    let inst = fixture("five_arms.json");
    assert_eq!(error_kind(&rmab(&["simulate", &inst, "random", "--replications", "0"])), "config");
    assert_eq!(error_kind(&rmab(&["simulate", &inst, "/no/such/indices.json"])), "missing-index");
    assert_eq!(error_kind(&rmab(&["simulate", "/no/instance.json", "oracle"])), "io");
}

#[test]
fn presets_run_by_name_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = rmab(&["learn-q", "--preset", "no-such-preset"]);
    assert_eq!(error_kind(&out), "config");
    let out = rmab(&["learn-q", "--preset", "desk-ci", "--seed", "0", "--out", dir.path().to_str().unwrap()]);
    let v = stdout_json(&out);
    assert_eq!(v["algorithms"].as_array().unwrap().len(), 2);
    assert!(dir.path().join("desk-ci_summary.json").exists());
}
