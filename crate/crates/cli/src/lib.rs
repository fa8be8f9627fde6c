//! Configuration loading, command dispatch and CSV output for the `chemo`
//! binary.

use std::fs;
use std::path::Path;

use thiserror::Error;

use chemo_core::control::{evaluate_objective, optimize, OptimizeResult};
use chemo_core::diagnostics::{drug_balance_residual, envelope_check, jeff_scenario};
use chemo_core::grid::Grid1D;
use chemo_core::model::{Coefficient, ModelParameters, Species};
use chemo_core::stepper::Side;
use chemo_core::{simulate, Trajectory};

pub mod config;
pub mod output;

pub use config::{parse_config, parse_config_str, write_config, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Solver(#[from] chemo_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn prepare(out: &Path) -> CliResult<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn write_trajectory_files(trajectory: &Trajectory, grid: &Grid1D, row_stride: usize, out: &Path) -> CliResult<()> {
    fs::write(out.join("trajectory.csv"), output::trajectory_csv(trajectory, row_stride))?;
    fs::write(out.join("snapshots.csv"), output::snapshots_csv(trajectory, grid))?;
    Ok(())
}

/// Runs the configured simulation and writes trajectory.csv and snapshots.csv.
pub fn run_simulate(config: &RunConfig, out: &Path) -> CliResult<Trajectory> {
    let sim = config.simulation()?;
    let trajectory = simulate(&sim.initial, &sim.params, &sim.grid, &sim.stepper, &sim.injection)?;
    prepare(out)?;
    write_trajectory_files(&trajectory, &sim.grid, config.output.stride, out)?;
    Ok(trajectory)
}

/// Optimizes the injection schedule and writes the optimal trajectory,
/// history.csv and best_control.csv.
pub fn run_optimize(config: &RunConfig, out: &Path) -> CliResult<OptimizeResult> {
    let ctl = config.control()?;
    let result = optimize(&ctl.initial_control, &ctl.setup, &ctl.objective, &ctl.options)?;
    let trajectory = ctl.setup.run(&result.best)?;
    prepare(out)?;
    write_trajectory_files(&trajectory, &ctl.setup.grid, config.output.stride, out)?;
    fs::write(out.join("history.csv"), output::history_csv(&result.history))?;
    fs::write(out.join("best_control.csv"), output::control_csv(result.best.series()))?;
    Ok(result)
}

/// One line of the validation report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    /// `None` when the check does not apply to this configuration.
    pub passed: Option<bool>,
    pub detail: String,
}

/// Simulates the configuration and checks the solver invariants on the run:
/// non-negativity, clipping, drug balance, the stability advisory and, for
/// constant growth rates on long runs, the carrying-capacity bounds.
pub fn validation_checks(config: &RunConfig) -> CliResult<Vec<Check>> {
    let sim = config.simulation()?;
    if config.stepper.t_end > 0.0 {
        config.control()?;
    }
    let mut checks = vec![Check {
        name: "config",
        passed: Some(true),
        detail: "all parameter invariants hold".into(),
    }];
    let trajectory = simulate(&sim.initial, &sim.params, &sim.grid, &sim.stepper, &sim.injection)?;

    let negative = trajectory
        .snapshots
        .iter()
        .flat_map(|s| s.state.fields().iter().flatten())
        .filter(|&&v| v < 0.0)
        .count();
    checks.push(Check {
        name: "non-negative",
        passed: Some(negative == 0),
        detail: format!("{negative} negative entries in stored snapshots"),
    });

    let worst_clip = trajectory
        .records
        .iter()
        .flat_map(|r| (0..4).map(move |k| (0.0 - r.min_preclip[k]) / r.sup[k].max(f64::MIN_POSITIVE)))
        .fold(0.0, f64::max);
    checks.push(Check {
        name: "clipping",
        passed: Some(worst_clip <= 1e-8),
        detail: format!("largest pre-clip excursion relative to sup-norm {worst_clip:.3e}"),
    });

    let residual = drug_balance_residual(&trajectory).into_iter().fold(0.0, f64::max);
    checks.push(Check {
        name: "drug-balance",
        passed: Some(residual <= 1e-8),
        detail: format!("largest relative residual {residual:.3e}"),
    });

    checks.push(Check {
        name: "stability",
        passed: None,
        detail: if trajectory.stability.is_clean() {
            "no step-size warnings".into()
        } else {
            trajectory.stability.warnings.join("; ")
        },
    });

    checks.push(capacity_check(&trajectory, &sim.params, Species::Normal, 0));
    checks.push(capacity_check(&trajectory, &sim.params, Species::Tumor, 1));
    Ok(checks)
}

fn capacity_check(trajectory: &Trajectory, params: &ModelParameters, species: Species, k: usize) -> Check {
    let name = match species {
        Species::Normal => "bound-N",
        _ => "bound-T",
    };
    let t_end = trajectory.final_record().t;
    let constant = matches!(params.growth[k], Coefficient::Constant(_));
    if !constant || t_end < 20.0 {
        return Check {
            name,
            passed: None,
            detail: "needs a constant growth rate and t_end >= 20".into(),
        };
    }
    let limit = 1.02 / params.inverse_capacity[k];
    let sup = trajectory
        .records
        .iter()
        .filter(|r| r.t >= 0.5 * t_end)
        .map(|r| r.sup[species.index()])
        .fold(0.0, f64::max);
    Check {
        name,
        passed: Some(sup <= limit),
        detail: format!("sup over t >= {} is {sup:.6}, limit {limit:.6}", 0.5 * t_end),
    }
}

/// Prints the validation report; fails with [`CliError::Validation`] when a
/// check does not pass.
pub fn run_validate(config: &RunConfig) -> CliResult<Vec<Check>> {
    let checks = validation_checks(config)?;
    let report = output::validation_report(&checks);
    print!("{report}");
    let failed: Vec<&str> = checks.iter().filter(|c| c.passed == Some(false)).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(checks)
    } else {
        Err(CliError::Validation(failed.join(", ")))
    }
}

/// Outcome of the periodic-treatment run.
#[derive(Debug, Clone)]
pub struct JeffSummary {
    pub trajectory: Trajectory,
    pub envelope: Vec<bool>,
}

/// Runs the periodic-treatment scenario on a unit domain with 64 cells and
/// writes trajectory.csv, snapshots.csv and envelope.csv.
pub fn run_jeff(out: &Path) -> CliResult<JeffSummary> {
    let grid = Grid1D::new(1.0, 64)?;
    let scenario = jeff_scenario(&ModelParameters::desk_default(), &grid);
    let trajectory = simulate(
        &scenario.initial,
        &scenario.params,
        &scenario.grid,
        &scenario.stepper,
        &scenario.injection,
    )?;
    let series = trajectory.series(|r| r.mass[Species::Tumor.index()]);
    let envelope = envelope_check(&series, scenario.interval, 5)?;
    prepare(out)?;
    write_trajectory_files(&trajectory, &grid, 1, out)?;
    fs::write(
        out.join("envelope.csv"),
        output::envelope_csv(&series, scenario.interval, 5, &envelope),
    )?;
    Ok(JeffSummary { trajectory, envelope })
}

/// Final cost report of a schedule, used by the optimize summary.
pub fn describe_best(config: &RunConfig, result: &OptimizeResult) -> CliResult<String> {
    let ctl = config.control()?;
    let report = evaluate_objective(&result.best, &ctl.setup, &ctl.objective)?;
    let left: Vec<String> = result.best.series().side(Side::Left).iter().map(|v| format!("{v:.4}")).collect();
    let right: Vec<String> = result.best.series().side(Side::Right).iter().map(|v| format!("{v:.4}")).collect();
    Ok(format!(
        "{:?} after {} iterations: total {:.6e}, terminal tumor mass {:.6e}, constraint min {:.6e}\nleft  [{}]\nright [{}]\n",
        result.termination,
        result.iterations,
        report.total,
        report.terminal_tumor,
        report.constraint_min.value,
        left.join(", "),
        right.join(", ")
    ))
}
