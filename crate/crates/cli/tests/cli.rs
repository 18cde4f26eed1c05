//! End-to-end checks of the `bandit-lab` binary: subcommands, output
//! formats, exit codes and cross-worker determinism.

use std::path::Path;
use std::process::{Command, Output};

fn bandit_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bandit-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("exp.toml");
    std::fs::write(
        &path,
        r#"
mode = "fixed-instance"
family = "bernoulli"
arms = [0.2, 0.8]
horizon = 100
replications = 50
seed = 9
checkpoints = [50, 100]
overlay_lower_bound = true

[[policy]]
kind = "kl-ucb"

[[policy]]
kind = "thompson-sampling"
"#,
    )
    .unwrap();
    path
}

#[test]
fn run_emits_csv_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = bandit_lab(&["run", "--config", config.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,policy,mean_regret,stderr,n_reps,seed");
    // 2 checkpoints x 2 policies + 2 overlay rows
    assert_eq!(lines.len(), 1 + 4 + 2);
    assert!(lines.iter().any(|l| l.contains("lower_bound")));
}

#[test]
fn run_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out_path = dir.path().join("result.json");
    let out = bandit_lab(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--format",
        "json",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&out_path).unwrap();
    let parsed = bandit_core::harness::parse_json(&text).unwrap();
    assert_eq!(parsed.checkpoints, vec![50, 100]);
    assert_eq!(parsed.curves.len(), 2);
}

#[test]
fn run_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = bandit_lab(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--policy",
        "uniform-random",
        "--reps",
        "10",
        "--seed",
        "1",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("uniform-random"));
    assert!(!text.contains("kl-ucb"));
    assert!(text.lines().nth(1).unwrap().ends_with(",10,1"));
}

#[test]
fn determinism_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let run = |workers: &str| {
        let out = bandit_lab(&[
            "run",
            "--config",
            config.to_str().unwrap(),
            "--workers",
            workers,
        ]);
        assert!(out.status.success());
        out.stdout
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn gittins_table_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.csv");
    let out = bandit_lab(&[
        "gittins-table",
        "--horizon",
        "10",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let table = bandit_core::gittins::BetaGittinsTable::read_csv(&path).unwrap();
    assert_eq!(table.horizon, 10);
    assert_eq!(table.lookup(0, 0, 1).unwrap(), 0.5);
}

#[test]
fn check_bounds_passes_and_prints_json() {
    let out = bandit_lab(&["check-bounds", "--suite", "pinsker", "--runs", "2000"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["pass"], serde_json::Value::Bool(true));
    }
}

#[test]
fn lower_bound_reports_constant() {
    let out = bandit_lab(&["lower-bound", "--family", "bernoulli", "--arms", "0.05,0.15"]);
    assert!(out.status.success());
    let v: serde_json::Value =
        serde_json::from_str(String::from_utf8(out.stdout).unwrap().trim()).unwrap();
    let c = v["constant"].as_f64().unwrap();
    assert!((c - 1.9710749123991926).abs() < 1e-9);
}

#[test]
fn exit_codes_reflect_error_class() {
    // missing file -> i/o error (4)
    let out = bandit_lab(&["run", "--config", "/definitely/not/here.toml"]);
    assert_eq!(out.status.code(), Some(4));

    // unknown key -> config error (2)
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "mode = \"fixed-instance\"\nnope = 1\n").unwrap();
    let out = bandit_lab(&["run", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // unknown suite -> config error (2)
    let out = bandit_lab(&["check-bounds", "--suite", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
}
