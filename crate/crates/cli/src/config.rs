//! JSON run configuration.
//!
//! Every block and every key is optional; missing keys take the desk
//! defaults. Unknown keys are rejected. Parameter keys use the short model
//! names (`r1`, `b1`, `c4`, `a0_gate`, ...).

use std::path::Path;

use serde::{Deserialize, Serialize};

use chemo_core::control::{
    ConstraintPenalty, ConstraintSpec, ControlSetup, GradientMethod, InjectionSchedule, KnotSeries, Objective,
    OptimizerOptions, PenaltyConfig,
};
use chemo_core::grid::{gaussian_bump, Grid1D};
use chemo_core::model::{Coefficient, Diffusivity, GrowthBounds, Interpolation, ModelParameters, Schedule};
use chemo_core::stepper::{InjectionProfile, Scheme, StepperConfig};
use chemo_core::StateVector;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridBlock,
    pub parameters: ParameterBlock,
    pub initial: InitialBlock,
    pub stepper: StepperBlock,
    pub injection: InjectionBlock,
    pub control: ControlBlock,
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridBlock {
    pub length: f64,
    pub cells: usize,
}

impl Default for GridBlock {
    fn default() -> Self {
        Self { length: 1.0, cells: 32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    #[default]
    Linear,
    Constant,
}

/// One knot value: a number, or one number per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KnotValue {
    Uniform(f64),
    PerCell(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub knots: Vec<f64>,
    pub values: Vec<KnotValue>,
    #[serde(default)]
    pub rule: Rule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientSpec {
    Constant(f64),
    Schedule(ScheduleSpec),
}

impl From<f64> for CoefficientSpec {
    fn from(c: f64) -> Self {
        CoefficientSpec::Constant(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineSpec {
    pub base: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DiffusionSpec {
    Constant(f64),
    Affine { affine: AffineSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParameterBlock {
    pub r1: CoefficientSpec,
    pub r2: CoefficientSpec,
    pub r3: CoefficientSpec,
    pub r_min: f64,
    pub r_max: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub k1: f64,
    pub k2: CoefficientSpec,
    pub k0: f64,
    pub alpha: f64,
    pub rho: f64,
    pub s: CoefficientSpec,
    pub delta: f64,
    pub a0_gate: f64,
    pub d1: DiffusionSpec,
    pub d2: DiffusionSpec,
    pub d3: DiffusionSpec,
    pub d4: DiffusionSpec,
    pub delta0: f64,
}

impl Default for ParameterBlock {
    fn default() -> Self {
        let p = ModelParameters::desk_default();
        let coef = |c: &Coefficient| match c {
            Coefficient::Constant(v) => CoefficientSpec::Constant(*v),
            Coefficient::Scheduled(_) => unreachable!("desk defaults are constant"),
        };
        let diff = |d: &Diffusivity| match *d {
            Diffusivity::Constant(v) => DiffusionSpec::Constant(v),
            Diffusivity::Affine { base, slope } => DiffusionSpec::Affine {
                affine: AffineSpec { base, slope },
            },
        };
        Self {
            r1: coef(&p.growth[0]),
            r2: coef(&p.growth[1]),
            r3: coef(&p.growth[2]),
            r_min: p.growth_bounds.min,
            r_max: p.growth_bounds.max,
            b1: p.inverse_capacity[0],
            b2: p.inverse_capacity[1],
            b3: p.inverse_capacity[2],
            c1: p.immune_loss_to_tumor,
            c2: p.tumor_kill_by_immune,
            c3: p.tumor_loss_to_normal,
            c4: p.normal_loss_to_tumor,
            a1: p.drug_kill_immune,
            a2: p.drug_kill_tumor,
            a3: p.drug_kill_normal,
            k1: p.immune_death,
            k2: coef(&p.drug_consumption),
            k0: p.drug_consumption_floor,
            alpha: p.immune_half_saturation,
            rho: p.immune_recruitment,
            s: coef(&p.immune_source),
            delta: p.gate_width,
            a0_gate: p.gate_threshold,
            d1: diff(&p.diffusion[0]),
            d2: diff(&p.diffusion[1]),
            d3: diff(&p.diffusion[2]),
            d4: diff(&p.diffusion[3]),
            delta0: p.diffusion_floor,
        }
    }
}

fn schedule(name: &str, spec: &ScheduleSpec) -> Result<Schedule, CliError> {
    let values = spec
        .values
        .iter()
        .map(|v| match v {
            KnotValue::Uniform(x) => vec![*x],
            KnotValue::PerCell(xs) => xs.clone(),
        })
        .collect();
    let rule = match spec.rule {
        Rule::Linear => Interpolation::Linear,
        Rule::Constant => Interpolation::Constant,
    };
    let at = |e: chemo_core::Error| CliError::Config(format!("{name}: {e}"));
    let s = Schedule::new(spec.knots.clone(), values, rule).map_err(at)?;
    match spec.period {
        Some(p) => s.with_period(p).map_err(at),
        None => Ok(s),
    }
}

fn coefficient(name: &str, spec: &CoefficientSpec) -> Result<Coefficient, CliError> {
    match spec {
        CoefficientSpec::Constant(v) => Ok(Coefficient::Constant(*v)),
        CoefficientSpec::Schedule(s) => Ok(Coefficient::Scheduled(schedule(name, s)?)),
    }
}

impl ParameterBlock {
    /// Model parameters, validated against a grid of `cells` cells.
    pub fn build(&self, cells: usize) -> Result<ModelParameters, CliError> {
        let diff = |d: &DiffusionSpec| match *d {
            DiffusionSpec::Constant(v) => Diffusivity::Constant(v),
            DiffusionSpec::Affine { affine } => Diffusivity::Affine {
                base: affine.base,
                slope: affine.slope,
            },
        };
        let params = ModelParameters {
            growth: [
                coefficient("r1", &self.r1)?,
                coefficient("r2", &self.r2)?,
                coefficient("r3", &self.r3)?,
            ],
            growth_bounds: GrowthBounds {
                min: self.r_min,
                max: self.r_max,
            },
            inverse_capacity: [self.b1, self.b2, self.b3],
            immune_loss_to_tumor: self.c1,
            tumor_kill_by_immune: self.c2,
            tumor_loss_to_normal: self.c3,
            normal_loss_to_tumor: self.c4,
            drug_kill_immune: self.a1,
            drug_kill_tumor: self.a2,
            drug_kill_normal: self.a3,
            immune_death: self.k1,
            drug_consumption: coefficient("k2", &self.k2)?,
            drug_consumption_floor: self.k0,
            immune_half_saturation: self.alpha,
            immune_recruitment: self.rho,
            immune_source: coefficient("s", &self.s)?,
            gate_width: self.delta,
            gate_threshold: self.a0_gate,
            diffusion: [diff(&self.d1), diff(&self.d2), diff(&self.d3), diff(&self.d4)],
            diffusion_floor: self.delta0,
        };
        params.validate(Some(cells)).map_err(config_error)?;
        Ok(params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub base: f64,
}

/// Initial profile of one species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Constant(f64),
    PerCell(Vec<f64>),
    Bump {
        #[serde(rename = "gaussian-bump")]
        gaussian_bump: BumpSpec,
    },
}

impl ProfileSpec {
    fn sample(&self, name: &str, grid: &Grid1D) -> Result<Vec<f64>, CliError> {
        match self {
            ProfileSpec::Constant(v) => Ok(vec![*v; grid.cells()]),
            ProfileSpec::PerCell(values) => {
                if values.len() != grid.cells() {
                    return Err(CliError::Config(format!(
                        "initial.{name}: {} values for {} cells",
                        values.len(),
                        grid.cells()
                    )));
                }
                Ok(values.clone())
            }
            ProfileSpec::Bump { gaussian_bump: b } => {
                if b.width.is_nan() || b.width <= 0.0 {
                    return Err(CliError::Config(format!("initial.{name}: gaussian-bump width must be positive")));
                }
                Ok(gaussian_bump(grid, b.center, b.width, b.amplitude, b.base))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialBlock {
    #[serde(rename = "N")]
    pub normal: ProfileSpec,
    #[serde(rename = "T")]
    pub tumor: ProfileSpec,
    #[serde(rename = "I")]
    pub immune: ProfileSpec,
    #[serde(rename = "U")]
    pub drug: ProfileSpec,
}

impl Default for InitialBlock {
    fn default() -> Self {
        Self {
            normal: ProfileSpec::Constant(0.9),
            tumor: ProfileSpec::Bump {
                gaussian_bump: BumpSpec {
                    center: 0.5,
                    width: 0.15,
                    amplitude: 0.3,
                    base: 0.05,
                },
            },
            immune: ProfileSpec::Constant(0.25),
            drug: ProfileSpec::Constant(0.0),
        }
    }
}

impl InitialBlock {
    pub fn build(&self, grid: &Grid1D) -> Result<StateVector, CliError> {
        StateVector::new(
            self.normal.sample("N", grid)?,
            self.tumor.sample("T", grid)?,
            self.immune.sample("I", grid)?,
            self.drug.sample("U", grid)?,
        )
        .map_err(config_error)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeSpec {
    ImexBe,
    ExplicitEuler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepperBlock {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: SchemeSpec,
    pub clip_tolerance: f64,
    pub snapshot_stride: usize,
    pub blowup_guard: f64,
    pub regularization: f64,
}

impl Default for StepperBlock {
    fn default() -> Self {
        let d = StepperConfig::default();
        Self {
            dt: 0.01,
            t_end: 5.0,
            scheme: SchemeSpec::ImexBe,
            clip_tolerance: d.clip_tolerance,
            snapshot_stride: 10,
            blowup_guard: d.blowup_guard,
            regularization: d.regularization,
        }
    }
}

impl StepperBlock {
    pub fn build(&self) -> Result<StepperConfig, CliError> {
        let cfg = StepperConfig {
            dt: self.dt,
            t_end: self.t_end,
            scheme: match self.scheme {
                SchemeSpec::ImexBe => Scheme::ImexBackwardEuler,
                SchemeSpec::ExplicitEuler => Scheme::ExplicitEuler,
            },
            clip_tolerance: self.clip_tolerance,
            snapshot_stride: self.snapshot_stride,
            blowup_guard: self.blowup_guard,
            regularization: self.regularization,
        };
        cfg.validate().map_err(config_error)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidePair {
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentialSpec {
    pub amplitude: f64,
    pub decay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideSchedules {
    pub left: CoefficientSpec,
    pub right: CoefficientSpec,
}

/// Boundary injection used by `simulate` and `validate`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum InjectionBlock {
    #[default]
    Zero,
    Constant(SidePair),
    Exponential(ExponentialSpec),
    Schedule(SideSchedules),
}

impl InjectionBlock {
    pub fn build(&self) -> Result<InjectionProfile, CliError> {
        let side = |name: &str, c: &CoefficientSpec| -> Result<Schedule, CliError> {
            match c {
                CoefficientSpec::Constant(v) => {
                    Schedule::uniform(vec![0.0], vec![*v], Interpolation::Constant).map_err(config_error)
                }
                CoefficientSpec::Schedule(s) => schedule(name, s),
            }
        };
        let profile = match self {
            InjectionBlock::Zero => InjectionProfile::Zero,
            InjectionBlock::Constant(p) => InjectionProfile::Constant {
                left: p.left,
                right: p.right,
            },
            InjectionBlock::Exponential(e) => InjectionProfile::Exponential {
                amplitude: e.amplitude,
                decay: e.decay,
            },
            InjectionBlock::Schedule(s) => InjectionProfile::Scheduled {
                left: side("injection.left", &s.left)?,
                right: side("injection.right", &s.right)?,
            },
        };
        profile.validate().map_err(config_error)?;
        Ok(profile)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientSpec {
    Sensitivity,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerBlock {
    pub max_iter: usize,
    pub step0: f64,
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub rel_tol: f64,
    pub gradient: GradientSpec,
}

impl Default for OptimizerBlock {
    fn default() -> Self {
        let o = OptimizerOptions::default();
        Self {
            max_iter: o.max_iter,
            step0: o.step0,
            armijo: o.armijo,
            backtrack: o.backtrack,
            max_backtracks: o.max_backtracks,
            rel_tol: o.rel_tol,
            gradient: GradientSpec::Sensitivity,
        }
    }
}

/// Control problem solved by `optimize`. The horizon is `stepper.t_end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlBlock {
    /// Interval boundaries `0 = t_0 < ... < t_m = t_end`; when absent the
    /// horizon is split into `intervals` equal pieces.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<f64>>,
    pub intervals: usize,
    pub upper_bound: f64,
    pub initial_value: f64,
    pub lambda: f64,
    /// `null` switches the constraint penalty off.
    pub penalty_eps: Option<f64>,
    pub a0_mass: f64,
    pub b0_mass: f64,
    pub sample_stride: usize,
    pub optimizer: OptimizerBlock,
}

impl Default for ControlBlock {
    fn default() -> Self {
        Self {
            knots: None,
            intervals: 4,
            upper_bound: 2.0,
            initial_value: 0.5,
            lambda: 0.01,
            penalty_eps: Some(0.05),
            a0_mass: 0.5,
            b0_mass: 0.15,
            sample_stride: 1,
            optimizer: OptimizerBlock::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    /// Used when no `--out` is given on the command line.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    /// Write every `stride`-th row of trajectory.csv (the last row is always written).
    pub stride: usize,
    pub formats: Vec<String>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            directory: None,
            stride: 1,
            formats: vec!["csv".into()],
        }
    }
}

/// Everything a simulation needs, built from a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct SimulationInputs {
    pub params: ModelParameters,
    pub grid: Grid1D,
    pub initial: StateVector,
    pub stepper: StepperConfig,
    pub injection: InjectionProfile,
}

/// Control problem built from a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct ControlInputs {
    pub setup: ControlSetup,
    pub initial_control: InjectionSchedule,
    pub objective: Objective,
    pub options: OptimizerOptions,
}

fn config_error(e: chemo_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

impl RunConfig {
    pub fn simulation(&self) -> Result<SimulationInputs, CliError> {
        let grid = Grid1D::new(self.grid.length, self.grid.cells).map_err(config_error)?;
        let params = self.parameters.build(grid.cells())?;
        let initial = self.initial.build(&grid)?;
        let stepper = self.stepper.build()?;
        let injection = self.injection.build()?;
        if self.output.stride == 0 {
            return Err(CliError::Config("output.stride: must be >= 1".into()));
        }
        if let Some(f) = self.output.formats.iter().find(|f| f.as_str() != "csv") {
            return Err(CliError::Config(format!("output.formats: unsupported format `{f}`")));
        }
        Ok(SimulationInputs {
            params,
            grid,
            initial,
            stepper,
            injection,
        })
    }

    pub fn control(&self) -> Result<ControlInputs, CliError> {
        let sim = self.simulation()?;
        let c = &self.control;
        let horizon = sim.stepper.t_end;
        let series = match &c.knots {
            Some(knots) => {
                let m = knots.len().saturating_sub(1);
                let v = vec![c.initial_value; m];
                KnotSeries::new(knots.clone(), v.clone(), v)
            }
            None => KnotSeries::uniform(horizon, c.intervals, c.initial_value),
        }
        .map_err(|e| CliError::Config(format!("control.knots: {e}")))?;
        let end = *series.knots().last().expect("knots");
        if (end - horizon).abs() > 1e-12 * horizon.max(1.0) {
            return Err(CliError::Config(format!(
                "control.knots: last knot {end} must equal the horizon stepper.t_end = {horizon}"
            )));
        }
        let initial_control = InjectionSchedule::new(series, c.upper_bound)
            .map_err(|e| CliError::Config(format!("control.initial_value: {e}")))?;
        let setup = ControlSetup {
            params: sim.params,
            grid: sim.grid,
            initial: sim.initial,
            stepper: sim.stepper,
        };
        let penalty = match c.penalty_eps {
            Some(eps) => {
                let constraints = ConstraintSpec {
                    normal_floor: c.a0_mass,
                    immune_floor: c.b0_mass,
                    sample_stride: c.sample_stride,
                };
                constraints
                    .validate(&setup.initial, setup.grid.spacing())
                    .map_err(config_error)?;
                Some(ConstraintPenalty {
                    constraints,
                    penalty: PenaltyConfig::new(eps).map_err(|e| CliError::Config(format!("penalty_eps: {e}")))?,
                })
            }
            None => None,
        };
        let objective = Objective {
            lambda: c.lambda,
            penalty,
        };
        objective.validate().map_err(config_error)?;
        let o = &c.optimizer;
        let options = OptimizerOptions {
            max_iter: o.max_iter,
            step0: o.step0,
            armijo: o.armijo,
            backtrack: o.backtrack,
            max_backtracks: o.max_backtracks,
            rel_tol: o.rel_tol,
            gradient: match o.gradient {
                GradientSpec::Sensitivity => GradientMethod::Sensitivity,
                GradientSpec::FiniteDifference => GradientMethod::FiniteDifference,
            },
        };
        options.validate().map_err(config_error)?;
        Ok(ControlInputs {
            setup,
            initial_control,
            objective,
            options,
        })
    }
}

/// Parses JSON text; structural errors carry line and column.
pub fn parse_config_str(text: &str) -> Result<RunConfig, CliError> {
    let config: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    config.simulation()?;
    // a zero horizon carries no control problem
    if config.stepper.t_end > 0.0 {
        config.control()?;
    }
    Ok(config)
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

/// Pretty-printed JSON that [`parse_config_str`] reads back to an equal config.
pub fn write_config(config: &RunConfig) -> String {
    serde_json::to_string_pretty(config).expect("config is serializable")
}
