use std::fs;
use std::path::Path;
use std::process::Command;

use logitq::io::{load_game, parse_game, save_game};
use logitq_core::{generate_random_game, GameGenConfig};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_logitq"))
}

fn code(cmd: &mut Command) -> i32 {
    cmd.output().expect("binary runs").status.code().expect("exit code")
}

fn write_game(dir: &Path, name: &str, states: usize, agents: usize, actions: usize, seed: u64) -> std::path::PathBuf {
    let g = generate_random_game(&GameGenConfig::uniform(states, agents, actions, 0.6, seed)).unwrap();
    let path = dir.join(name);
    save_game(&g, &path).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_happy_path() {
    let dir = tempfile::tempdir().unwrap();
    let game = write_game(dir.path(), "g.json", 3, 2, 2, 1);
    let out = dir.path().join("sol.json");
    let status = code(bin().args(["solve", "--game"]).arg(&game).args(["--tol", "1e-10", "--out"]).arg(&out));
    assert_eq!(status, 0);
    let doc = read_json(&out);
    assert_eq!(doc["v_star"].as_array().unwrap().len(), 3);
    assert_eq!(doc["q_star"].as_array().unwrap().len(), 3);
    assert!(doc["residual"].as_f64().unwrap() <= 1e-10);
    assert_eq!(doc["header"]["tol"].as_f64(), Some(1e-10));
}

#[test]
fn solve_elides_large_q_tables() {
    let dir = tempfile::tempdir().unwrap();
    let game = write_game(dir.path(), "g.json", 2, 2, 2, 1);
    let out = dir.path().join("sol.json");
    let status = code(bin().args(["solve", "--elide-above", "4", "--game"]).arg(&game).arg("--out").arg(&out));
    assert_eq!(status, 0);
    let doc = read_json(&out);
    assert!(doc["q_star"].is_null());
    assert_eq!(doc["q_star_elided"], Value::Bool(true));
}

#[test]
fn missing_flag_exits_one_and_names_it() {
    let out = bin().arg("solve").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--game"));
}

#[test]
fn bad_values_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let game = write_game(dir.path(), "g.json", 2, 1, 2, 1);
    assert_eq!(code(bin().args(["solve", "--tol", "-1", "--game"]).arg(&game)), 1);
    assert_eq!(code(bin().args(["solve", "--tol", "abc", "--game"]).arg(&game)), 1);
    assert_eq!(code(bin().args(["frobnicate"])), 1);
    let out = dir.path().join("x.csv");
    assert_eq!(
        code(bin().args(["simulate", "--scheme", "freq", "--tau", "0", "--out"]).arg(&out)),
        1
    );
    assert_eq!(code(bin().args(["analyze", "--gamma", "1.0"])), 1);
    assert_eq!(code(bin().args(["--threads", "0", "analyze"])), 1);
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(bin().arg("--help")), 0);
    assert_eq!(code(bin().arg("--version")), 0);
}

#[test]
fn invalid_game_document_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{"n_agents":1,"n_states":1,"action_counts":[1],"discount":0.5,"reward":[[1.0]],"transition":[[[0.9]]]}"#,
    )
    .unwrap();
    let out = bin().args(["solve", "--game"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sums to 0.9"));
}

#[test]
fn unreadable_game_exits_two() {
    assert_eq!(code(bin().args(["solve", "--game", "/nonexistent/game.json"])), 2);
}

#[test]
fn game_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = generate_random_game(&GameGenConfig::uniform(4, 3, 2, 0.9, 7)).unwrap();
    let path = dir.path().join("g.json");
    save_game(&g, &path).unwrap();
    assert_eq!(load_game(&path).unwrap(), g);
    assert!(parse_game(r#"{"n_agents":1}"#).is_err());
}

#[test]
fn generate_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let game = dir.path().join("g.json");
    assert_eq!(
        code(bin().args(["--seed", "4", "generate", "--states", "3", "--agents", "2", "--actions", "2", "--out"]).arg(&game)),
        0
    );
    let out = dir.path().join("a.json");
    assert_eq!(code(bin().args(["analyze", "--game"]).arg(&game).arg("--out").arg(&out)), 0);
    let doc = read_json(&out);
    assert_eq!(doc["recurrent_classes"], serde_json::json!([[0, 1, 2]]));
    assert_eq!(doc["transient_states"], serde_json::json!([]));
    assert_eq!(doc["projection_check"], Value::Bool(true));
}

#[test]
fn verify_stationary_reports_small_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.json");
    assert_eq!(code(bin().args(["--seed", "9", "verify-stationary", "--count", "20", "--out"]).arg(&out)), 0);
    let doc = read_json(&out);
    assert_eq!(doc["cases"].as_array().unwrap().len(), 20);
    assert!(doc["max_linf_gap"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn simulate_writes_csv_and_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let status = code(
        bin()
            .args(["--seed", "3", "simulate", "--scheme", "ave", "--tau", "0.01", "--rounds", "5", "--base-length", "20", "--out"])
            .arg(&out),
    );
    assert_eq!(status, 0);
    let csv = fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5 * 2);
    let summary = read_json(&out.with_extension("json"));
    assert_eq!(summary["header"]["config"]["tau"].as_f64(), Some(0.01));
    assert_eq!(summary["header"]["config"]["seed"].as_u64(), Some(3));
    assert_eq!(summary["header"]["config"]["base_length"].as_u64(), Some(20));
}

#[test]
fn experiment_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (k, threads) in ["1", "3", "3"].iter().enumerate() {
        let csv = dir.path().join(format!("e{k}.csv"));
        let cfg = serde_json::json!({
            "game": {"generate": {"n_states": 2, "action_counts": [2, 2], "discount": 0.6}},
            "scheme": "freq", "tau": 0.001, "rounds": 6, "base_length": 50, "n_runs": 5,
            "seed": 11, "output": csv,
        });
        let cfg_path = dir.path().join(format!("cfg{k}.json"));
        fs::write(&cfg_path, cfg.to_string()).unwrap();
        assert_eq!(code(bin().args(["--threads", threads, "experiment", "--config"]).arg(&cfg_path)), 0);
        outputs.push(fs::read(&csv).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
    assert_eq!(String::from_utf8_lossy(&outputs[0]).lines().count(), 1 + 5 * 6 * 2);
}

#[test]
fn experiment_config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    fs::write(
        &cfg_path,
        r#"{"game":{"generate":{"n_states":2,"action_counts":[2],"discount":0.6}},"scheme":"ave","tau":0.1,"n_runs":0,"seed":1,"output":"x.csv"}"#,
    )
    .unwrap();
    let out = bin().args(["experiment", "--config"]).arg(&cfg_path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_runs"));
}
