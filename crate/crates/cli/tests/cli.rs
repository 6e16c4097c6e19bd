use std::path::Path;
use std::process::{Command, Output};

use rosternet::harness::{bus_scenario, StaffingReport};
use rosternet::model::{objective_value, ConstraintExpr, ObjectiveKind, ScenarioSpec, StaffingVector};
use rosternet::solver::evaluate_expr_relaxed;

fn rosternet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rosternet")).args(args).output().expect("binary runs")
}

fn write_scenario(dir: &Path, sc: &ScenarioSpec) -> String {
    let path = dir.join("scenario.json");
    std::fs::write(&path, serde_json::to_string_pretty(sc).unwrap()).unwrap();
    path.display().to_string()
}

/// Two routes, 1..=3 drivers each, cost objective.
fn tiny_scenario() -> ScenarioSpec {
    let mut sc = bus_scenario();
    sc.positions.truncate(2);
    sc.employees.truncate(4);
    sc.positions[0].headcount_max = 3;
    sc.positions[1].required_per_shift = vec![2];
    sc.positions[1].headcount_max = 3;
    sc.employees[2].wage_rate = 30.0;
    sc.total_headcount_max = 4;
    sc.constraint_expr = ConstraintExpr::all_of([1, 2, 5, 8]);
    sc.objective = ObjectiveKind::TotalCost;
    sc
}

#[test]
fn solve_matches_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    let sc = tiny_scenario();
    let path = write_scenario(dir.path(), &sc);
    let out_dir = dir.path().join("out");
    let out = rosternet(&["solve", "--scenario", &path, "--out", out_dir.to_str().unwrap(), "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let mut best = f64::INFINITY;
    for a in 0..=3 {
        for b in 0..=3 {
            let x = StaffingVector::new(vec![vec![a], vec![b]]);
            if evaluate_expr_relaxed(&sc.constraint_expr, &sc, &x).unwrap() {
                best = best.min(objective_value(sc.objective, &sc, &x).unwrap());
            }
        }
    }
    let rep: StaffingReport =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("staffing.json")).unwrap()).unwrap();
    assert!(rep.feasible);
    assert!((rep.best_objective - best).abs() < 1e-9, "{} vs {best}", rep.best_objective);
    assert!(out_dir.join("ga_log.csv").exists());
    assert!(out_dir.join("manifest.json").exists());
}

#[test]
fn impossible_bounds_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut sc = tiny_scenario();
    sc.positions[0].headcount_max = 0;
    let path = write_scenario(dir.path(), &sc);
    let out = rosternet(&["solve", "--scenario", &path, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("headcount_max 0"), "{err}");
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("o");
    let o = o.to_str().unwrap();
    assert_eq!(rosternet(&["solve", "--out", o, "--set", "ga.bogus=1"]).status.code(), Some(1));
    assert_eq!(rosternet(&["solve", "--out", o, "--set", "novalue"]).status.code(), Some(1));
    assert_eq!(rosternet(&["train", "--out", o, "--network", "CNN"]).status.code(), Some(1));
    assert_eq!(rosternet(&["solve", "--out", o, "--scenario", "/nonexistent.json"]).status.code(), Some(1));
    assert_eq!(rosternet(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn divergence_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("o");
    let out = rosternet(&[
        "train",
        "--out",
        o.to_str().unwrap(),
        "--scenario",
        &write_scenario(dir.path(), &bus_scenario()),
        "--iterations",
        "50",
        "--set",
        "forecast.optimizer.learning_rate=1e300",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn manifest_echoes_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("o");
    let out = rosternet(&["solve", "--out", o.to_str().unwrap(), "--seed", "17", "--set", "ga.generations=5"]);
    assert!(out.status.success());
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(o.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "solve");
    assert_eq!(m["seed"], 17);
    assert_eq!(m["config"]["ga"]["rng_seed"], 17);
    assert_eq!(m["config"]["ga"]["generations"], 5);
    assert_eq!(m["overrides"][0][0], "ga.generations");

    // the echoed config reproduces the run
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, m["config"].to_string()).unwrap();
    let o2 = dir.path().join("o2");
    let again = rosternet(&["solve", "--out", o2.to_str().unwrap(), "--config", cfg.to_str().unwrap(), "--seed", "17"]);
    assert!(again.status.success());
    assert_eq!(std::fs::read(o.join("staffing.json")).unwrap(), std::fs::read(o2.join("staffing.json")).unwrap());
}

#[test]
fn staged_pipeline_reuses_inputs_without_touching_them() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("o");
    let o = o.to_str().unwrap();
    let sc = write_scenario(dir.path(), &bus_scenario());
    let base = ["--out", o, "--scenario", sc.as_str(), "--seed", "2", "--iterations", "40"];
    for cmd in ["solve", "generate", "train"] {
        let mut args = vec![cmd];
        args.extend(base);
        assert!(rosternet(&args).status.success(), "{cmd}");
    }
    let roster = std::fs::read(Path::new(o).join("roster.csv")).unwrap();
    let model = std::fs::read(Path::new(o).join("model.json")).unwrap();
    let mut args = vec!["forecast"];
    args.extend(base);
    let out = rosternet(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(Path::new(o).join("roster.csv")).unwrap(), roster);
    assert_eq!(std::fs::read(Path::new(o).join("model.json")).unwrap(), model);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("forecast.csv") && !stdout.contains("roster.csv"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(Path::new(o).join("report.json")).unwrap()).unwrap();
    assert_eq!(report["test_days"], 7);
}

#[test]
fn bus_demo_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let o = dir.path().join(name);
        let out = rosternet(&["bus-demo", "--out", o.to_str().unwrap(), "--seed", "9", "--iterations", "300"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (std::fs::read(o.join("roster.csv")).unwrap(), std::fs::read(o.join("FDNN_loss.csv")).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn compare_ranks_selected_networks() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("o");
    let out = rosternet(&[
        "compare",
        "--out",
        o.to_str().unwrap(),
        "--scenario",
        &write_scenario(dir.path(), &bus_scenario()),
        "--network",
        "FDNN,RBFNN",
        "--iterations",
        "20",
        "--optimizer",
        "rmsprop",
        "--loss",
        "smooth_l1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(o.join("report.json")).unwrap()).unwrap();
    assert_eq!(r["ranking"].as_array().unwrap().len(), 2);
    assert_eq!(r["reports"][0]["optimizer"], "RMSprop");
    assert_eq!(r["reports"][0]["loss"], "SMOOTH_L1");
    assert!(o.join("FDNN_loss.csv").exists() && o.join("RBFNN_loss.csv").exists());
}
