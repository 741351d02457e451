use std::path::Path;
use std::process::{Command, Output};

use h2pid::cli::RunConfig;

fn h2pid(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_h2pid"))
        .args(args)
        .args(["--out", dir.to_str().unwrap()])
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn tune_writes_gains_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = h2pid(&["tune", "--case", "velocity", "--method", "lqr"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    for key in ["case", "method", "kp", "ki", "kd", "residual", "h2_norm_closed_loop"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    assert!((json["kp"].as_f64().unwrap() + 354.1).abs() < 0.05);
    assert!(dir.path().join("gains_velocity_lqr.json").is_file());
    assert!(dir.path().join("model_velocity.csv").is_file());
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(h2pid(&["tune", "--case", "sideways"], dir.path()).status.code(), Some(1));
    assert_eq!(h2pid(&["fly"], dir.path()).status.code(), Some(1));
    let missing = dir.path().join("nope.json");
    assert_eq!(h2pid(&["tune", "--config", missing.to_str().unwrap()], dir.path()).status.code(), Some(1));
}

#[test]
fn zero_cost_tuning_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"method": "lqr", "lqr_q_diag": [0, 0, 0]}"#).unwrap();
    let code = h2pid(&["tune", "--config", cfg.to_str().unwrap()], dir.path()).status.code();
    assert!(matches!(code, Some(2) | Some(3)), "{code:?}");
}

#[test]
fn certify_exit_code_follows_feasibility() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(h2pid(&["certify"], dir.path()).status.code(), Some(0));
    let infeasible = h2pid(&["certify", "--gamma", "0"], dir.path());
    assert_eq!(infeasible.status.code(), Some(3));
    let json: serde_json::Value = serde_json::from_str(&stdout(&infeasible)).unwrap();
    assert_eq!(json["certificate"]["feasible"], false);

    let gains = dir.path().join("flipped.json");
    h2pid(&["tune"], dir.path());
    let mut tuned: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("gains_velocity_h2.json")).unwrap()).unwrap();
    for key in ["kp", "ki", "kd"] {
        tuned[key] = serde_json::json!(-tuned[key].as_f64().unwrap());
    }
    std::fs::write(&gains, tuned.to_string()).unwrap();
    let flipped = h2pid(&["certify", "--gains", gains.to_str().unwrap()], dir.path());
    assert_eq!(flipped.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&flipped.stderr).contains("eigenvalues"));
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        assert_eq!(h2pid(&["simulate", "--seed", "42"], dir).status.code(), Some(0));
    }
    let read = |d: &Path| std::fs::read(d.join("trajectory_velocity_h2.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    let stats = |d: &Path| std::fs::read(d.join("stats_velocity_h2.json")).unwrap();
    assert_eq!(stats(a.path()), stats(b.path()));
}

#[test]
fn report_needs_inputs_or_inline_flag() {
    let dir = tempfile::tempdir().unwrap();
    let missing = h2pid(&["report", "--case", "position"], dir.path());
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("stats_position_h2.json"));

    let inline = h2pid(&["report", "--case", "position", "--inline"], dir.path());
    assert_eq!(inline.status.code(), Some(0));
    let table = stdout(&inline);
    assert!(table.contains("H2-PID") && table.contains("LQR-PID"));

    // The inline run left stats behind, so a plain report now works.
    let cached = h2pid(&["report", "--case", "position"], dir.path());
    assert_eq!(cached.status.code(), Some(0));
    assert_eq!(stdout(&cached), table);
}

#[test]
fn resolved_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = h2pid(&["config", "--case", "position", "--wu-mode", "scaled", "--seed", "9"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let parsed = RunConfig::from_json(&stdout(&out)).unwrap();
    assert_eq!(parsed.dryden.seed, 9);
    assert_eq!(RunConfig::from_json(&parsed.to_json()).unwrap(), parsed);

    let path = dir.path().join("cfg.json");
    std::fs::write(&path, stdout(&out)).unwrap();
    let again = h2pid(&["config", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(stdout(&again), stdout(&out));
}
