use chemo_cli::config::{CoefficientSpec, DiffusionSpec, AffineSpec, InjectionBlock, KnotValue, ProfileSpec, Rule, ScheduleSpec, SidePair};
use chemo_cli::{parse_config, parse_config_str, write_config, CliError, RunConfig};
use chemo_core::model::ModelParameters;

fn config_error(text: &str) -> String {
    match parse_config_str(text) {
        Err(CliError::Config(msg)) => msg,
        other => panic!("expected a configuration error, got {other:?}"),
    }
}

#[test]
fn empty_object_gives_documented_defaults() {
    let cfg = parse_config_str("{}").unwrap();
    assert_eq!(cfg, RunConfig::default());
    let sim = cfg.simulation().unwrap();
    assert_eq!(sim.params, ModelParameters::desk_default());
    assert_eq!(sim.grid.cells(), 32);
    assert_eq!(sim.stepper.t_end, 5.0);
}

#[test]
fn invariant_violations_name_the_key() {
    let msg = config_error(r#"{"parameters": {"b1": -1}}"#);
    assert!(msg.contains("b1") && msg.contains("inverse carrying capacities positive"), "{msg}");

    let msg = config_error(r#"{"parameters": {"a0_gate": 1.5, "b1": 1}}"#);
    assert!(msg.contains("a0_gate < 1/b1 violated"), "{msg}");

    let msg = config_error(r#"{"parameters": {"k2": 1e-4}}"#);
    assert!(msg.contains("k2"), "{msg}");

    let msg = config_error(r#"{"stepper": {"dt": 0}}"#);
    assert!(msg.contains("dt"), "{msg}");
}

#[test]
fn unknown_keys_are_rejected() {
    let msg = config_error(r#"{"parameters": {"r9": 1}}"#);
    assert!(msg.contains("r9"), "{msg}");
    let msg = config_error(r#"{"grid": {"cells": 10, "height": 2}}"#);
    assert!(msg.contains("height"), "{msg}");
}

#[test]
fn syntax_errors_report_the_line() {
    let msg = config_error("{\n  \"grid\": {\n    \"cells\": 10,\n  }\n}");
    assert!(msg.contains("line 4"), "{msg}");
}

#[test]
fn missing_file_is_a_config_error() {
    let err = parse_config(std::path::Path::new("/nonexistent/run.json")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn round_trip_preserves_every_block() {
    let mut cfg = RunConfig::default();
    cfg.grid.cells = 8;
    cfg.parameters.r2 = CoefficientSpec::Schedule(ScheduleSpec {
        knots: vec![0.0, 0.6, 0.7, 1.0],
        values: vec![1.1, 1.1, 1e-4, 1e-4].into_iter().map(KnotValue::Uniform).collect(),
        rule: Rule::Linear,
        period: Some(1.0),
    });
    cfg.parameters.s = CoefficientSpec::Schedule(ScheduleSpec {
        knots: vec![0.0, 2.0],
        values: vec![KnotValue::PerCell(vec![0.1; 8]), KnotValue::PerCell((0..8).map(|k| k as f64 / 70.0).collect())],
        rule: Rule::Constant,
        period: None,
    });
    cfg.parameters.d3 = DiffusionSpec::Affine {
        affine: AffineSpec { base: 0.1, slope: 0.3 },
    };
    cfg.parameters.r_min = 1e-5;
    cfg.initial.immune = ProfileSpec::PerCell((0..8).map(|k| 0.1 + 0.01 * k as f64).collect());
    cfg.injection = InjectionBlock::Constant(SidePair { left: 0.3, right: 1.0 / 3.0 });
    cfg.control.knots = Some(vec![0.0, 1.0, 2.5, 5.0]);
    cfg.control.penalty_eps = None;
    cfg.output.directory = Some("out".into());

    let text = write_config(&cfg);
    let back = parse_config_str(&text).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(write_config(&back), text);
}

#[test]
fn schedules_and_profiles_build() {
    let text = r#"{
        "grid": {"length": 2.0, "cells": 4},
        "parameters": {"r_min": 1e-4, "r2": {"knots": [0, 0.6, 0.7], "values": [1.1, 1.1, 1e-4], "period": 1}},
        "initial": {"T": {"gaussian-bump": {"center": 1.0, "width": 0.3, "amplitude": 0.5}}, "N": [0.9, 0.8, 0.8, 0.9]},
        "injection": {"exponential": {"amplitude": 0.5, "decay": 1.0}}
    }"#;
    let sim = parse_config_str(text).unwrap().simulation().unwrap();
    assert!((sim.params.growth[1].eval(0, 3.3) - 1.1).abs() < 1e-12);
    assert_eq!(sim.initial.field(chemo_core::Species::Normal), &[0.9, 0.8, 0.8, 0.9]);
    let t = sim.initial.field(chemo_core::Species::Tumor);
    assert!(t[1] > 0.3 && t[0] < t[1] && t[1] == t[2]);

    let msg = config_error(r#"{"grid": {"cells": 4}, "initial": {"N": [1, 1]}}"#);
    assert!(msg.contains("initial.N"), "{msg}");
}

#[test]
fn control_block_is_checked_on_load() {
    let msg = config_error(r#"{"control": {"initial_value": 3.0}}"#);
    assert!(msg.contains("control"), "{msg}");
    let msg = config_error(r#"{"control": {"knots": [0, 1, 2]}}"#);
    assert!(msg.contains("horizon"), "{msg}");
    let msg = config_error(r#"{"control": {"a0_mass": 5.0}}"#);
    assert!(msg.contains("a0"), "{msg}");
}
