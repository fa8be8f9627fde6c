//! Optimal boundary injection.
//!
//! The control is a piecewise-constant injection rate on each boundary point,
//! boxed in `[0, upper]`. The objective is the terminal tumor mass plus
//! `lambda * max(v)`, optionally penalized by a quadratic hinge on the
//! smallest sampled normal or immune mass.

mod optimize;
mod sensitivity;

pub use optimize::{gradient, optimize, GradientMethod, IterationRecord, OptimizeResult, OptimizerOptions, Termination};
pub use sensitivity::{sensitivity_solve, SensitivityRun};

use crate::diagnostics::mass;
use crate::error::{param, Error, Result};
use crate::grid::{gaussian_bump, Grid1D};
use crate::model::{ModelParameters, Species, StateVector};
use crate::stepper::{simulate, Injection, Side, StepperConfig, Trajectory};

/// Piecewise-constant boundary values on the intervals `[knots[j], knots[j+1])`.
///
/// Carries no bounds, so it also serves as a perturbation direction.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotSeries {
    knots: Vec<f64>,
    values: [Vec<f64>; 2],
}

impl KnotSeries {
    pub fn new(knots: Vec<f64>, left: Vec<f64>, right: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(param("control.knots", "need at least one interval"));
        }
        if knots[0] != 0.0 {
            return Err(param("control.knots", "first knot must be 0"));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) || knots.iter().any(|t| !t.is_finite()) {
            return Err(param("control.knots", "knot times must be finite and strictly increasing"));
        }
        let m = knots.len() - 1;
        if left.len() != m || right.len() != m {
            return Err(Error::Dimension(format!(
                "{m} control intervals but {} left and {} right values",
                left.len(),
                right.len()
            )));
        }
        if left.iter().chain(&right).any(|v| !v.is_finite()) {
            return Err(param("control.values", "values must be finite"));
        }
        Ok(Self {
            knots,
            values: [left, right],
        })
    }

    /// `intervals` equal intervals on `[0, horizon]`, every value `value`.
    pub fn uniform(horizon: f64, intervals: usize, value: f64) -> Result<Self> {
        if intervals == 0 || !(horizon > 0.0) {
            return Err(param("control.knots", "need a positive horizon and at least one interval"));
        }
        let mut knots: Vec<f64> = (0..intervals).map(|j| horizon * j as f64 / intervals as f64).collect();
        knots.push(horizon);
        Self::new(knots, vec![value; intervals], vec![value; intervals])
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn intervals(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn side(&self, side: Side) -> &[f64] {
        &self.values[side.index()]
    }

    /// Number of scalar coordinates, `2 * intervals`.
    pub fn dimension(&self) -> usize {
        2 * self.intervals()
    }

    /// Coordinates in time order, left before right within an interval.
    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.intervals())
            .flat_map(|j| [self.values[0][j], self.values[1][j]])
            .collect()
    }

    /// Same knots, new coordinates in the order of [`KnotSeries::coordinates`].
    pub fn with_coordinates(&self, coords: &[f64]) -> Result<Self> {
        if coords.len() != self.dimension() {
            return Err(Error::Dimension(format!(
                "expected {} coordinates, got {}",
                self.dimension(),
                coords.len()
            )));
        }
        let left = coords.iter().step_by(2).copied().collect();
        let right = coords.iter().skip(1).step_by(2).copied().collect();
        Self::new(self.knots.clone(), left, right)
    }

    /// Unit vector along one coordinate.
    pub fn indicator(&self, coordinate: usize) -> Self {
        let mut coords = vec![0.0; self.dimension()];
        coords[coordinate] = 1.0;
        self.with_coordinates(&coords).expect("same shape")
    }

    fn interval_at(&self, t: f64) -> usize {
        let m = self.intervals();
        self.knots[1..m].partition_point(|&k| k <= t)
    }

    pub fn value(&self, side: Side, t: f64) -> f64 {
        self.values[side.index()][self.interval_at(t)]
    }
}

impl Injection for KnotSeries {
    fn rate(&self, side: Side, t: f64) -> f64 {
        self.value(side, t)
    }
}

/// An admissible control: a [`KnotSeries`] with every value in `[0, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionSchedule {
    series: KnotSeries,
    upper: f64,
}

impl InjectionSchedule {
    pub fn new(series: KnotSeries, upper: f64) -> Result<Self> {
        if !(upper.is_finite() && upper > 0.0) {
            return Err(param("control.upper_bound", "upper bound must be positive"));
        }
        if let Some(v) = series.coordinates().into_iter().find(|v| !(*v >= 0.0 && *v <= upper)) {
            return Err(Error::Admissibility(format!("control value {v} outside [0, {upper}]")));
        }
        Ok(Self { series, upper })
    }

    pub fn series(&self) -> &KnotSeries {
        &self.series
    }

    pub fn upper_bound(&self) -> f64 {
        self.upper
    }

    /// `max |v|`, which for a piecewise-constant control is its largest coefficient.
    pub fn sup_norm(&self) -> f64 {
        self.series.coordinates().into_iter().fold(0.0, f64::max)
    }

    pub fn coordinates(&self) -> Vec<f64> {
        self.series.coordinates()
    }

    /// Clamps arbitrary coordinates into the box and wraps them.
    pub fn projected(&self, coords: &[f64]) -> Result<Self> {
        let clamped: Vec<f64> = coords.iter().map(|v| v.clamp(0.0, self.upper)).collect();
        Self::new(self.series.with_coordinates(&clamped)?, self.upper)
    }
}

impl Injection for InjectionSchedule {
    fn rate(&self, side: Side, t: f64) -> f64 {
        self.series.value(side, t)
    }
}

/// Componentwise clamp of a series into `[0, upper]`.
pub fn project(v: &KnotSeries, upper: f64) -> Result<InjectionSchedule> {
    let clamped: Vec<f64> = v.coordinates().iter().map(|x| x.clamp(0.0, upper)).collect();
    InjectionSchedule::new(v.with_coordinates(&clamped)?, upper)
}

/// Everything needed to run the state equation for a given control.
#[derive(Debug, Clone)]
pub struct ControlSetup {
    pub params: ModelParameters,
    pub grid: Grid1D,
    pub initial: StateVector,
    /// `t_end` is the terminal time `t0` of the cost.
    pub stepper: StepperConfig,
}

impl ControlSetup {
    pub fn horizon(&self) -> f64 {
        self.stepper.t_end
    }

    /// Stepper settings that keep every time level (needed by sensitivities).
    pub(crate) fn dense_stepper(&self) -> StepperConfig {
        StepperConfig {
            snapshot_stride: 1,
            ..self.stepper.clone()
        }
    }

    fn check_control(&self, v: &KnotSeries) -> Result<()> {
        let end = *v.knots().last().expect("knots");
        if (end - self.horizon()).abs() > 1e-12 * self.horizon().max(1.0) {
            return Err(param(
                "control.knots",
                format!("last knot {end} must equal the horizon {}", self.horizon()),
            ));
        }
        Ok(())
    }

    pub fn run(&self, v: &InjectionSchedule) -> Result<Trajectory> {
        self.check_control(v.series())?;
        simulate(&self.initial, &self.params, &self.grid, &self.stepper, v)
    }

    pub(crate) fn run_dense(&self, v: &InjectionSchedule) -> Result<Trajectory> {
        self.check_control(v.series())?;
        simulate(&self.initial, &self.params, &self.grid, &self.dense_stepper(), v)
    }
}

/// Floors on the integrated normal and immune masses over `[0, t0]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintSpec {
    pub normal_floor: f64,
    pub immune_floor: f64,
    /// Constraint samples are taken every `sample_stride` steps and at `t0`.
    pub sample_stride: usize,
}

impl ConstraintSpec {
    /// `M0 = min(a0, b0)`.
    pub fn threshold(&self) -> f64 {
        self.normal_floor.min(self.immune_floor)
    }

    /// Checks `0 < a0 < A0` and `0 < b0 < B0` against the initial masses.
    pub fn validate(&self, initial: &StateVector, h: f64) -> Result<()> {
        let a0 = mass(initial.field(Species::Normal), h);
        let b0 = mass(initial.field(Species::Immune), h);
        if !(self.normal_floor > 0.0 && self.normal_floor < a0) {
            return Err(param(
                "a0_mass",
                format!("0 < a0_mass < initial normal mass {a0} violated: {}", self.normal_floor),
            ));
        }
        if !(self.immune_floor > 0.0 && self.immune_floor < b0) {
            return Err(param(
                "b0_mass",
                format!("0 < b0_mass < initial immune mass {b0} violated: {}", self.immune_floor),
            ));
        }
        if self.sample_stride == 0 {
            return Err(param("sample_stride", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyForm {
    QuadraticHinge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConfig {
    pub eps: f64,
    pub form: PenaltyForm,
}

impl PenaltyConfig {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(param("penalty_eps", format!("must be positive, got {eps}")));
        }
        Ok(Self {
            eps,
            form: PenaltyForm::QuadraticHinge,
        })
    }
}

/// `(1/eps) * max(0, (M0 + eps - z) / eps)^2`: zero above `M0 + eps`, `1/eps` at `M0`.
pub fn penalty_beta(z: f64, threshold: f64, eps: f64) -> Result<f64> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(param("penalty_eps", format!("must be positive, got {eps}")));
    }
    let gap = ((threshold + eps - z) / eps).max(0.0);
    Ok(gap * gap / eps)
}

/// Derivative of [`penalty_beta`] with respect to `z`.
pub fn penalty_beta_slope(z: f64, threshold: f64, eps: f64) -> Result<f64> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(param("penalty_eps", format!("must be positive, got {eps}")));
    }
    let gap = ((threshold + eps - z) / eps).max(0.0);
    Ok(-2.0 * gap / (eps * eps))
}

/// Penalty together with the constraint it enforces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintPenalty {
    pub constraints: ConstraintSpec,
    pub penalty: PenaltyConfig,
}

/// The objective being minimized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub lambda: f64,
    pub penalty: Option<ConstraintPenalty>,
}

impl Objective {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(param("lambda", format!("must be >= 0, got {}", self.lambda)));
        }
        if let Some(p) = &self.penalty {
            PenaltyConfig::new(p.penalty.eps)?;
        }
        Ok(())
    }
}

/// Smallest sampled normal or immune mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintMinimum {
    pub value: f64,
    pub time: f64,
    /// Index into `Trajectory::records`.
    pub step: usize,
    pub species: Species,
}

/// Earliest sample attaining `min(mass_N, mass_I)`; ties go to the normal cells.
pub fn constraint_minimum(trajectory: &Trajectory, sample_stride: usize) -> ConstraintMinimum {
    let last = trajectory.records.len() - 1;
    let stride = sample_stride.max(1);
    let mut best: Option<ConstraintMinimum> = None;
    for (step, record) in trajectory.records.iter().enumerate() {
        if step % stride != 0 && step != last {
            continue;
        }
        for species in [Species::Normal, Species::Immune] {
            let value = record.mass[species.index()];
            if best.is_none_or(|b| value < b.value) {
                best = Some(ConstraintMinimum {
                    value,
                    time: record.t,
                    step,
                    species,
                });
            }
        }
    }
    best.expect("trajectory has records")
}

/// Decomposition of the (penalized) objective for one control.
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub terminal_tumor: f64,
    pub lambda_term: f64,
    pub penalty: f64,
    pub total: f64,
    pub constraint_min: ConstraintMinimum,
    /// Whether the sampled constraint holds (`constraint_min >= M0`); always
    /// true when no constraint is configured.
    pub feasible: bool,
}

fn report(trajectory: &Trajectory, v: &InjectionSchedule, objective: &Objective) -> Result<CostReport> {
    let terminal_tumor = trajectory.final_record().mass[Species::Tumor.index()];
    let lambda_term = objective.lambda * v.sup_norm();
    let (constraint_min, penalty, feasible) = match &objective.penalty {
        Some(cp) => {
            let m = constraint_minimum(trajectory, cp.constraints.sample_stride);
            let threshold = cp.constraints.threshold();
            let beta = penalty_beta(m.value, threshold, cp.penalty.eps)?;
            (m, beta, m.value >= threshold)
        }
        None => (constraint_minimum(trajectory, 1), 0.0, true),
    };
    Ok(CostReport {
        terminal_tumor,
        lambda_term,
        penalty,
        total: terminal_tumor + lambda_term + penalty,
        constraint_min,
        feasible,
    })
}

/// `J(v) = mass_T(t0) + lambda * max(v)`.
pub fn evaluate_cost(v: &InjectionSchedule, setup: &ControlSetup, lambda: f64) -> Result<CostReport> {
    evaluate_objective(v, setup, &Objective { lambda, penalty: None })
}

/// `J(v) + beta_eps(min over samples of min(mass_N, mass_I))`.
pub fn penalized_cost(
    v: &InjectionSchedule,
    setup: &ControlSetup,
    lambda: f64,
    penalty: PenaltyConfig,
    constraints: ConstraintSpec,
) -> Result<CostReport> {
    let objective = Objective {
        lambda,
        penalty: Some(ConstraintPenalty { constraints, penalty }),
    };
    evaluate_objective(v, setup, &objective)
}

pub fn evaluate_objective(v: &InjectionSchedule, setup: &ControlSetup, objective: &Objective) -> Result<CostReport> {
    objective.validate()?;
    let trajectory = setup.run(v)?;
    report(&trajectory, v, objective)
}

/// The small control problem used by the tests and the default configuration:
/// unit domain with 32 cells, desk parameters, horizon 5, 4 control intervals
/// per side bounded by 2, `lambda = 0.01`, `eps = 0.05`, floors 0.5 / 0.15.
#[derive(Debug, Clone)]
pub struct DeskProblem {
    pub setup: ControlSetup,
    pub initial_control: InjectionSchedule,
    pub objective: Objective,
}

pub fn desk_problem() -> DeskProblem {
    let grid = Grid1D::new(1.0, 32).expect("static grid");
    let n = grid.cells();
    let initial = StateVector::new(
        vec![0.9; n],
        gaussian_bump(&grid, 0.5, 0.15, 0.3, 0.05),
        vec![0.25; n],
        vec![0.0; n],
    )
    .expect("non-negative");
    let stepper = StepperConfig {
        dt: 0.01,
        t_end: 5.0,
        ..StepperConfig::default()
    };
    let setup = ControlSetup {
        params: ModelParameters::desk_default(),
        grid,
        initial,
        stepper,
    };
    let series = KnotSeries::uniform(5.0, 4, 0.5).expect("static");
    DeskProblem {
        setup,
        initial_control: InjectionSchedule::new(series, 2.0).expect("inside box"),
        objective: Objective {
            lambda: 0.01,
            penalty: Some(ConstraintPenalty {
                constraints: ConstraintSpec {
                    normal_floor: 0.5,
                    immune_floor: 0.15,
                    sample_stride: 1,
                },
                penalty: PenaltyConfig::new(0.05).expect("positive"),
            }),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn penalty_values() {
        let (m0, eps) = (0.3, 0.05);
        assert_eq!(penalty_beta(m0 + eps, m0, eps).unwrap(), 0.0);
        assert_eq!(penalty_beta(m0 + 1.0, m0, eps).unwrap(), 0.0);
        assert!((penalty_beta(m0, m0, eps).unwrap() - 1.0 / eps).abs() < 1e-9);
        assert!((penalty_beta(m0 + eps / 2.0, m0, eps).unwrap() - 1.0 / (4.0 * eps)).abs() < 1e-9);
        assert!(penalty_beta(1.0, m0, 0.0).is_err());
    }

    #[test]
    fn penalty_slope_matches_difference_quotient() {
        let (m0, eps) = (0.3, 0.05);
        for z in [0.1, 0.3, 0.32, 0.349] {
            let h = 1e-7;
            let fd = (penalty_beta(z + h, m0, eps).unwrap() - penalty_beta(z - h, m0, eps).unwrap()) / (2.0 * h);
            let slope = penalty_beta_slope(z, m0, eps).unwrap();
            assert!((fd - slope).abs() <= 1e-5 * slope.abs().max(1.0), "{z}: {fd} vs {slope}");
        }
    }

    #[test]
    fn projection_clamps() {
        let s = KnotSeries::new(vec![0.0, 1.0, 2.0], vec![0.5, 3.0], vec![-0.3, 1.0]).unwrap();
        let p = project(&s, 2.0).unwrap();
        assert_eq!(p.coordinates(), vec![0.5, 0.0, 2.0, 1.0]);
        let inner = KnotSeries::uniform(1.0, 3, 0.7).unwrap();
        assert_eq!(project(&inner, 2.0).unwrap().series(), &inner);
    }

    #[test]
    fn schedule_box_is_enforced() {
        let s = KnotSeries::uniform(1.0, 2, 2.5).unwrap();
        assert!(matches!(InjectionSchedule::new(s, 2.0), Err(Error::Admissibility(_))));
        let s = KnotSeries::uniform(1.0, 2, -0.1).unwrap();
        assert!(InjectionSchedule::new(s, 2.0).is_err());
    }

    #[test]
    fn piecewise_constant_lookup() {
        let s = KnotSeries::new(vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]).unwrap();
        assert_eq!(s.value(Side::Left, 0.0), 1.0);
        assert_eq!(s.value(Side::Left, 0.999), 1.0);
        assert_eq!(s.value(Side::Left, 1.0), 2.0);
        assert_eq!(s.value(Side::Right, 2.5), 6.0);
        assert_eq!(s.value(Side::Right, 7.0), 6.0);
        assert_eq!(s.coordinates(), vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(s.with_coordinates(&s.coordinates()).unwrap(), s);
    }

    #[test]
    fn sup_norm_is_largest_coefficient() {
        let s = KnotSeries::new(vec![0.0, 1.0, 2.0], vec![0.2, 1.7], vec![0.4, 0.0]).unwrap();
        assert_eq!(InjectionSchedule::new(s, 2.0).unwrap().sup_norm(), 1.7);
    }

    #[test]
    fn constraint_floor_validation() {
        let desk = desk_problem();
        let h = desk.setup.grid.spacing();
        let mut c = desk.objective.penalty.unwrap().constraints;
        assert!(c.validate(&desk.setup.initial, h).is_ok());
        c.normal_floor = 0.95;
        assert!(c.validate(&desk.setup.initial, h).is_err());
    }
}
