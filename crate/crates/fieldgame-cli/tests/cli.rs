//! End-to-end tests of the `fieldgame` binary: exit-code contract,
//! artifact shapes, determinism across thread counts, and the
//! solve → verify pipeline.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_fieldgame")
}

/// Fresh scratch directory per test, namespaced by the test name.
fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fieldgame-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const INERT_LQ: &str = r#"{"type": "lq", "n": 1, "k1": 1, "k2": 1, "T": 1.0, "a": [0.75],
 "matrices": {"N11": 1.0, "N21": -1.0}}"#;

const SCALAR_LQ: &str = r#"{"type": "lq", "n": 1, "k1": 1, "k2": 1, "T": 1.0, "a": [1.0],
 "matrices": {"A1": 0.5, "A2": -0.2, "B11": 1.0, "B12": 0.2, "B21": 0.8,
              "C1": 0.2, "D11": 0.5, "F1": 0.3, "G21": 0.4,
              "N11": 1.0, "N12": 0.25, "N21": -1.0, "N22": -0.25,
              "Q": [1.0], "M": [1.0], "h": 0.4}}"#;

#[test]
fn zero_coefficient_problem_keeps_the_state_constant() {
    let dir = workdir("inert");
    let problem = dir.join("problem.json");
    fs::write(&problem, INERT_LQ).unwrap();
    let out_dir = dir.join("out");
    let out = run(&[
        "simulate",
        "--problem",
        problem.to_str().unwrap(),
        "--steps",
        "8",
        "--particles",
        "10",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    let mut rows = 0;
    for line in csv.lines().skip(2) {
        let fields: Vec<&str> = line.split(',').collect();
        let x: f64 = fields[2].parse().unwrap();
        assert_eq!(x, 0.75, "state drifted despite zero coefficients: {line}");
        rows += 1;
    }
    assert_eq!(rows, 9 * 10);
}

#[test]
fn indefinite_control_cost_is_rejected_before_running() {
    let dir = workdir("indefinite");
    let problem = dir.join("problem.json");
    fs::write(
        &problem,
        r#"{"type": "lq", "n": 1, "k1": 1, "k2": 1, "T": 1.0, "a": [0.0],
           "matrices": {"N11": 0.0, "N21": -1.0}}"#,
    )
    .unwrap();
    let out = run(&["simulate", "--problem", problem.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("positive definiteness margin"),
        "diagnostic does not name the broken structure: {}",
        stderr(&out)
    );
}

#[test]
fn missing_control_cost_matrix_is_named() {
    let dir = workdir("missing");
    let problem = dir.join("problem.json");
    fs::write(
        &problem,
        r#"{"type": "lq", "n": 1, "k1": 1, "k2": 1, "T": 1.0, "a": [0.0],
           "matrices": {"N11": 1.0}}"#,
    )
    .unwrap();
    let out = run(&["solve-lq", "--problem", problem.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("N21"), "{}", stderr(&out));
}

#[test]
fn malformed_json_reports_line_and_column() {
    let dir = workdir("malformed");
    let problem = dir.join("problem.json");
    fs::write(&problem, "{ bad\n").unwrap();
    let out = run(&["simulate", "--problem", problem.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert!(msg.contains("line 1") && msg.contains("column"), "{msg}");
}

#[test]
fn identical_runs_are_byte_identical_across_thread_counts() {
    let dir = workdir("determinism");
    let problem = dir.join("problem.json");
    fs::write(&problem, SCALAR_LQ).unwrap();
    let (a, b) = (dir.join("a"), dir.join("b"));
    for (out_dir, threads) in [(&a, "1"), (&b, "3")] {
        let out = run(&[
            "simulate",
            "--problem",
            problem.to_str().unwrap(),
            "--steps",
            "20",
            "--particles",
            "400",
            "--formulation",
            "both",
            "--threads",
            threads,
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    for name in ["trajectory.csv", "summary.json", "cost_strong.json", "cost_weak.json"] {
        let left = fs::read(a.join(name)).unwrap();
        let right = fs::read(b.join(name)).unwrap();
        assert_eq!(left, right, "{name} differs between thread counts");
    }
}

#[test]
fn solve_lq_writes_constant_adjoint_and_the_worked_control() {
    // Zero state cost keeps p pinned at M = 2; with B11 = 1 and
    // N11 = 1 the player-1 control is -B11·p / (2·N11) = -1.
    let dir = workdir("worked");
    let problem = dir.join("problem.json");
    fs::write(
        &problem,
        r#"{"type": "lq", "n": 1, "k1": 1, "k2": 1, "T": 1.0, "a": [0.0],
           "matrices": {"N11": 1.0, "N21": -1.0, "B11": 1.0, "M": [2.0]}}"#,
    )
    .unwrap();
    let out_dir = dir.join("out");
    let out = run(&[
        "solve-lq",
        "--problem",
        problem.to_str().unwrap(),
        "--steps",
        "16",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let adjoint = fs::read_to_string(out_dir.join("adjoint.csv")).unwrap();
    for line in adjoint.lines().skip(2) {
        let p: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((p - 2.0).abs() < 1e-12, "{line}");
    }
    let controls = fs::read_to_string(out_dir.join("controls_u1.csv")).unwrap();
    let mut rows = 0;
    for line in controls.lines().skip(3) {
        let u: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((u + 1.0).abs() < 1e-12, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 16);
}

#[test]
fn solve_lq_rejects_general_problems() {
    let dir = workdir("general");
    let problem = dir.join("problem.json");
    fs::write(
        &problem,
        r#"{"type": "general", "n": 1, "k1": 1, "k2": 1, "T": 1.0, "a": [0.0],
           "coefficients": {"running_cost":
             {"family": "quadratic", "quadratic": {"u1": 1.0, "u2": -1.0}}}}"#,
    )
    .unwrap();
    let out = run(&["solve-lq", "--problem", problem.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("verify"), "{}", stderr(&out));
}

/// Shared pipeline helper: solve, then verify with the written controls.
fn solve_and_verify(tag: &str, mutate_u1: impl Fn(f64) -> f64) -> (Output, PathBuf) {
    let dir = workdir(tag);
    let problem = dir.join("problem.json");
    fs::write(&problem, SCALAR_LQ).unwrap();
    let solved = dir.join("solved");
    let out = run(&[
        "solve-lq",
        "--problem",
        problem.to_str().unwrap(),
        "--steps",
        "40",
        "--out",
        solved.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    // Rewrite the player-1 control column through the mutation.
    let u1_path = solved.join("controls_u1.csv");
    let text = fs::read_to_string(&u1_path).unwrap();
    let mutated: String = text
        .lines()
        .map(|line| {
            if line.starts_with('#') || line.starts_with("time") {
                format!("{line}\n")
            } else {
                let mut fields = line.split(',');
                let t = fields.next().unwrap();
                let u: f64 = fields.next().unwrap().parse().unwrap();
                format!("{t},{:e}\n", mutate_u1(u))
            }
        })
        .collect();
    fs::write(&u1_path, mutated).unwrap();

    let verified = dir.join("verified");
    let out = run(&[
        "verify",
        "--problem",
        problem.to_str().unwrap(),
        "--u1",
        u1_path.to_str().unwrap(),
        "--u2",
        solved.join("controls_u2.csv").to_str().unwrap(),
        "--steps",
        "40",
        "--particles",
        "1500",
        "--perturbations",
        "4",
        "--formulation",
        "both",
        "--out",
        verified.to_str().unwrap(),
    ]);
    (out, verified)
}

#[test]
fn solve_then_verify_pipeline_passes() {
    let (out, verified) = solve_and_verify("pipeline", |u| u);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(verified.join("saddle_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["verdict"], true);
    assert_eq!(report["perturbations"].as_array().unwrap().len(), 8);
    assert!(report["stationarity"]["max_player1"].as_f64().unwrap() < 1e-6);
    assert_eq!(report["convexity"]["pass"], true);
    assert!(verified.join("saddle_checks.csv").exists());
}

#[test]
fn corrupted_player_one_controls_fail_verification() {
    let (out, verified) = solve_and_verify("corrupted", |u| u + 1.0);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(verified.join("saddle_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["verdict"], false);
    // The shifted player-1 control sits strictly uphill: at least one
    // unilateral player-1 move lowers the cost beyond its error bar.
    let violated = report["perturbations"]
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c["player"] == 1 && c["pass"] == false);
    assert!(violated, "no violated player-1 inequality in the report");
}

#[test]
fn weak_and_strong_costs_coincide_without_observation_drift() {
    let dir = workdir("weakstrong");
    let problem = dir.join("problem.json");
    // Same scalar instance with the observation drift h removed.
    fs::write(
        &problem,
        r#"{"type": "lq", "n": 1, "k1": 1, "k2": 1, "T": 1.0, "a": [1.0],
 "matrices": {"A1": 0.5, "A2": -0.2, "B11": 1.0, "B12": 0.2, "B21": 0.8,
              "C1": 0.2, "D11": 0.5, "F1": 0.3, "G21": 0.4,
              "N11": 1.0, "N12": 0.25, "N21": -1.0, "N22": -0.25,
              "Q": [1.0], "M": [1.0]}}"#,
    )
    .unwrap();
    let out_dir = dir.join("out");
    let out = run(&[
        "verify",
        "--problem",
        problem.to_str().unwrap(),
        "--steps",
        "20",
        "--particles",
        "500",
        "--perturbations",
        "2",
        "--formulation",
        "both",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let strong: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("cost_strong.json")).unwrap())
            .unwrap();
    let weak: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("cost_weak.json")).unwrap())
            .unwrap();
    // With no observation drift the density is the constant 1 and the
    // two formulations agree to the last bit.
    assert_eq!(
        strong["J"].as_f64().unwrap().to_bits(),
        weak["J"].as_f64().unwrap().to_bits()
    );
    assert_eq!(
        strong["se"].as_f64().unwrap().to_bits(),
        weak["se"].as_f64().unwrap().to_bits()
    );
}

#[test]
fn control_grid_outside_the_horizon_is_rejected() {
    let dir = workdir("gridclash");
    let problem = dir.join("problem.json");
    fs::write(&problem, INERT_LQ).unwrap();
    let controls = dir.join("u1.csv");
    fs::write(&controls, "time,u_0\n0.0,0.1\n1.5,0.2\n").unwrap();
    let u2 = dir.join("u2.csv");
    fs::write(&u2, "time,u_0\n0.0,0.0\n").unwrap();
    let out = run(&[
        "verify",
        "--problem",
        problem.to_str().unwrap(),
        "--u1",
        controls.to_str().unwrap(),
        "--u2",
        u2.to_str().unwrap(),
        "--steps",
        "4",
        "--particles",
        "8",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("horizon"), "{}", stderr(&out));
}
