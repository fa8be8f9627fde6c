use std::path::Path;
use std::process::Command;

use chemo_cli::output::{CONTROL_HEADER, HISTORY_HEADER, SNAPSHOT_HEADER, TRAJECTORY_HEADER};
use chemo_cli::{parse_config_str, run_jeff, run_optimize, run_simulate, validation_checks};
use chemo_core::diagnostics::mass;
use chemo_core::Species;

fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn chemo(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_chemo")).args(args).output().unwrap()
}

#[test]
fn zero_horizon_writes_the_initial_row() {
    let dir = tempfile::tempdir().unwrap();
    let config = parse_config_str(r#"{"stepper": {"t_end": 0}}"#).unwrap();
    run_simulate(&config, dir.path()).unwrap();
    let table = rows(&dir.path().join("trajectory.csv"));
    assert_eq!(table[0].join(","), TRAJECTORY_HEADER);
    assert_eq!(table.len(), 2);
    let init = config.simulation().unwrap();
    let h = init.grid.spacing();
    for species in Species::ALL {
        let written: f64 = table[1][1 + species.index()].parse().unwrap();
        assert_eq!(written, mass(init.initial.field(species), h));
    }
    let snaps = rows(&dir.path().join("snapshots.csv"));
    assert_eq!(snaps[0].join(","), SNAPSHOT_HEADER);
    assert_eq!(snaps.len(), 1 + init.grid.cells());
}

#[test]
fn trajectory_rows_follow_the_output_stride() {
    let dir = tempfile::tempdir().unwrap();
    let config = parse_config_str(r#"{"stepper": {"dt": 0.1, "t_end": 1.0}, "output": {"stride": 3}, "control": {"intervals": 2}}"#).unwrap();
    run_simulate(&config, dir.path()).unwrap();
    let table = rows(&dir.path().join("trajectory.csv"));
    let times: Vec<f64> = table[1..].iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(times.len(), 5);
    assert!((times[3] - 0.9).abs() < 1e-12);
    assert_eq!(*times.last().unwrap(), 1.0);
}

#[test]
fn numbers_round_trip_through_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = parse_config_str(r#"{"stepper": {"t_end": 0.5}, "control": {"intervals": 1}}"#).unwrap();
    let traj = run_simulate(&config, dir.path()).unwrap();
    let table = rows(&dir.path().join("trajectory.csv"));
    let last: f64 = table.last().unwrap()[2].parse().unwrap();
    assert_eq!(last, traj.final_record().mass[1]);
}

#[test]
fn optimize_writes_history_and_control() {
    let dir = tempfile::tempdir().unwrap();
    let config = parse_config_str(r#"{"control": {"optimizer": {"max_iter": 2}}}"#).unwrap();
    let result = run_optimize(&config, dir.path()).unwrap();
    let history = rows(&dir.path().join("history.csv"));
    assert_eq!(history[0].join(","), HISTORY_HEADER);
    assert_eq!(history.len(), 1 + result.history.len());
    let control = rows(&dir.path().join("best_control.csv"));
    assert_eq!(control[0].join(","), CONTROL_HEADER);
    assert_eq!(control.len(), 1 + 8);
    assert_eq!(control[1][0], "left");
    assert_eq!(control[5][0], "right");
}

#[test]
fn jeff_run_passes_its_envelope() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run_jeff(dir.path()).unwrap();
    assert!(!summary.envelope.is_empty());
    assert!(summary.envelope.iter().all(|&ok| ok));
    assert!(dir.path().join("envelope.csv").exists());
}

#[test]
fn validate_reports_checks() {
    let config = parse_config_str(r#"{"stepper": {"t_end": 25}, "injection": {"constant": {"left": 1, "right": 1}}, "control": {"intervals": 5}}"#).unwrap();
    let checks = validation_checks(&config).unwrap();
    assert!(checks.iter().all(|c| c.passed != Some(false)), "{checks:?}");
    assert!(checks.iter().any(|c| c.name == "bound-N" && c.passed == Some(true)));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    let bad = dir.path().join("bad.json");
    let unknown = dir.path().join("unknown.json");
    std::fs::write(&good, r#"{"stepper": {"t_end": 1}, "control": {"intervals": 2}}"#).unwrap();
    std::fs::write(&bad, r#"{"parameters": {"b1": -1}}"#).unwrap();
    std::fs::write(&unknown, r#"{"colour": "blue"}"#).unwrap();

    assert_eq!(chemo(&["validate", "--config", good.to_str().unwrap()]).status.code(), Some(0));
    let out = chemo(&["validate", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("b1"));
    assert_eq!(chemo(&["simulate", "--config", unknown.to_str().unwrap(), "--out", "x"]).status.code(), Some(2));

    // invariants that fail at run time exit with 1
    let tight = dir.path().join("tight.json");
    std::fs::write(&tight, r#"{"stepper": {"t_end": 1, "blowup_guard": 0.5}, "control": {"intervals": 2}}"#).unwrap();
    assert_eq!(chemo(&["validate", "--config", tight.to_str().unwrap()]).status.code(), Some(1));

    let out_dir = dir.path().join("sim");
    let out = chemo(&["simulate", "--config", good.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out_dir.join("trajectory.csv").exists());
}
