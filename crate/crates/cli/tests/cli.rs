use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn irsuav(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irsuav")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn scenario(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn solve_writes_every_artifact() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");
    let o = irsuav(&["solve", "--out", out.to_str().unwrap(), "--debug-dump", "--dump-trajectories"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "manifest.json",
        "report.json",
        "state.json",
        "timings.json",
        "convergence.csv",
        "convergence.json",
        "trajectory-3d.csv",
        "trajectory-2d.csv",
        "velocity-profile.csv",
        "problems/scheduling-01.txt",
        "problems/trajectory-01.txt",
        "problems/reflection-01.txt",
        "trajectories/iter-00.csv",
        "trajectories/iter-01.csv",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["converged"], serde_json::Value::Bool(true));
    assert!(String::from_utf8_lossy(&o.stdout).contains("kappa"));
}

#[test]
fn infeasible_scenarios_exit_with_2() {
    let dir = TempDir::new().unwrap();
    let demand = scenario(dir.path(), "demand.json", r#"{"min_rate": 1000}"#);
    let reach = scenario(dir.path(), "reach.json", r#"{"v_max": 1}"#);
    for s in [demand, reach] {
        let o = irsuav(&["solve", "--scenario", &s, "--out", dir.path().join("out").to_str().unwrap()]);
        assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn malformed_input_exits_with_1() {
    let dir = TempDir::new().unwrap();
    let unknown = scenario(dir.path(), "unknown.json", r#"{"noise": 1}"#);
    let out = dir.path().join("out");
    let o = irsuav(&["solve", "--scenario", &unknown, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown field"));
    let o = irsuav(&["solve", "--scenario", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert_eq!(code(&irsuav(&["solve", "--baseline", "nonsense"])), 1);
    assert_eq!(code(&irsuav(&["frobnicate"])), 1);
}

#[test]
fn help_exits_cleanly() {
    let o = irsuav(&["--help"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("sweep"));
}

#[test]
fn empty_sweep_writes_a_header_only_table() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sweep");
    let o = irsuav(&["sweep", "--axis", "num-elements", "--values=", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv, "num-elements,baseline,kappa,iterations,wall_clock\n");
    assert!(out.join("sweep-plot.csv").is_file());
}

#[test]
fn sweep_reports_each_cell() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sweep");
    let o = irsuav(&["sweep", "--axis", "min-rate", "--values", "10,20", "--baselines", "proposed,no-irs", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn oracle_appends_records() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("oracle");
    let o = irsuav(&["oracle", "--samples", "20000", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["oracle"].as_array().unwrap().len(), 6);
    assert!(!String::from_utf8_lossy(&o.stdout).contains("ABOVE BOUND"));
}

#[test]
fn identical_invocations_give_identical_reports() {
    let dir = TempDir::new().unwrap();
    let read = |name: &str| {
        let out = dir.path().join(name);
        assert_eq!(code(&irsuav(&["solve", "--seed", "5", "--out", out.to_str().unwrap()])), 0);
        std::fs::read(out.join("report.json")).unwrap()
    };
    assert_eq!(read("a"), read("b"));
}

#[test]
fn bare_values_flag_is_an_empty_sweep() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sweep");
    let o = irsuav(&["sweep", "--axis", "horizon", "--values", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(out.join("sweep.csv")).unwrap().lines().count(), 1);
    assert_eq!(code(&irsuav(&["sweep", "--axis", "horizon", "--values", "1,x"])), 1);
}
