//! IMEX time stepping: backward-Euler diffusion with face coefficients
//! frozen at the start of the step, explicit reactions and boundary flux.
//!
//! Negative entries produced by a step are clipped to zero and the added
//! mass is recorded per species, so that every run carries an exact account
//! of how far the scheme left the non-negative cone.

use crate::diagnostics::{mass, sup_norm};
use crate::error::{param, Error, Result};
use crate::grid::{apply_diffusion, apply_drug_boundary_flux, face_diffusion, solve_implicit_diffusion, Grid1D};
use crate::grid::{BoundaryGate, FaceCoefficients};
use crate::model::{eval_reactions, regularize_reactions, ModelParameters, Quad, Schedule, Site, Species, StateVector};

/// One of the two boundary points of the 1D domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// Boundary injection rate `v(side, t)`.
pub trait Injection: Sync {
    fn rate(&self, side: Side, t: f64) -> f64;
}

impl<F> Injection for F
where
    F: Fn(Side, f64) -> f64 + Sync,
{
    fn rate(&self, side: Side, t: f64) -> f64 {
        self(side, t)
    }
}

/// Injection profiles that can be written down in a configuration file.
#[derive(Debug, Clone, PartialEq)]
pub enum InjectionProfile {
    Zero,
    Constant { left: f64, right: f64 },
    /// `amplitude * exp(-decay * t)` on both sides.
    Exponential { amplitude: f64, decay: f64 },
    Scheduled { left: Schedule, right: Schedule },
}

impl InjectionProfile {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(param("injection", what.to_string()));
        match self {
            InjectionProfile::Zero => Ok(()),
            InjectionProfile::Constant { left, right } => {
                if *left >= 0.0 && *right >= 0.0 && left.is_finite() && right.is_finite() {
                    Ok(())
                } else {
                    bad("constant injection rates must be finite and >= 0")
                }
            }
            InjectionProfile::Exponential { amplitude, decay } => {
                if *amplitude >= 0.0 && amplitude.is_finite() && decay.is_finite() {
                    Ok(())
                } else {
                    bad("exponential injection needs a finite amplitude >= 0 and a finite decay")
                }
            }
            InjectionProfile::Scheduled { left, right } => {
                let neg = [left, right]
                    .iter()
                    .any(|s| s.width() != 1 || s.values().iter().flatten().any(|&v| v < 0.0));
                if neg {
                    bad("scheduled injection must be spatially scalar and >= 0")
                } else {
                    Ok(())
                }
            }
        }
    }
}

impl Injection for InjectionProfile {
    fn rate(&self, side: Side, t: f64) -> f64 {
        match self {
            InjectionProfile::Zero => 0.0,
            InjectionProfile::Constant { left, right } => match side {
                Side::Left => *left,
                Side::Right => *right,
            },
            InjectionProfile::Exponential { amplitude, decay } => amplitude * (-decay * t).exp(),
            InjectionProfile::Scheduled { left, right } => match side {
                Side::Left => left.eval(0, t),
                Side::Right => right.eval(0, t),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Backward-Euler diffusion, explicit reactions.
    ImexBackwardEuler,
    /// Forward Euler for everything.
    ExplicitEuler,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    /// Negative entries deeper than this count as clip events.
    pub clip_tolerance: f64,
    pub snapshot_stride: usize,
    pub blowup_guard: f64,
    /// `eps` of [`regularize_reactions`]; 0 disables it.
    pub regularization: f64,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt: 1e-2,
            t_end: 1.0,
            scheme: Scheme::ImexBackwardEuler,
            clip_tolerance: 0.0,
            snapshot_stride: 1,
            blowup_guard: 1e6,
            regularization: 0.0,
        }
    }
}

impl StepperConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(param("dt", format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(param("t_end", format!("horizon must be >= 0, got {}", self.t_end)));
        }
        if self.snapshot_stride == 0 {
            return Err(param("snapshot_stride", "stride must be >= 1"));
        }
        if !(self.clip_tolerance >= 0.0) {
            return Err(param("clip_tolerance", "must be >= 0"));
        }
        if !(self.blowup_guard > 0.0) {
            return Err(param("blowup_guard", "must be positive"));
        }
        if !(self.regularization >= 0.0 && self.regularization.is_finite()) {
            return Err(param("regularization", "must be >= 0"));
        }
        Ok(())
    }
}

/// Step start times `0 = t_0 < t_1 < ... < t_N = t_end`; all steps have
/// length `dt` except possibly the last.
pub fn time_grid(t_end: f64, dt: f64) -> Vec<f64> {
    if t_end <= 0.0 {
        return vec![0.0];
    }
    let steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut times: Vec<f64> = (0..steps).map(|n| n as f64 * dt).collect();
    times.push(t_end);
    times
}

/// Diagnostics of the state at the end of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    /// Length of the step that produced this state; 0 for the initial record.
    pub dt: f64,
    pub mass: Quad,
    pub sup: Quad,
    /// Drug entering through the boundary, `v_l H_l + v_r H_r`, during the step.
    pub influx: f64,
    /// Drug consumed by the reaction term, `-sum F_U h`, during the step.
    pub consumption: f64,
    /// Mass added per species by clipping negative entries.
    pub clipped: Quad,
    pub clip_events: usize,
    /// Most negative pre-clip value per species (0 if none).
    pub min_preclip: Quad,
}

impl StepRecord {
    fn initial(state: &StateVector, h: f64) -> Self {
        let fields = state.fields();
        Self {
            t: 0.0,
            dt: 0.0,
            mass: std::array::from_fn(|k| mass(&fields[k], h)),
            sup: std::array::from_fn(|k| sup_norm(&fields[k])),
            influx: 0.0,
            consumption: 0.0,
            clipped: [0.0; 4],
            clip_events: 0,
            min_preclip: [0.0; 4],
        }
    }

    pub fn clipped_total(&self) -> f64 {
        self.clipped.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub state: StateVector,
}

/// Stored snapshots plus per-step diagnostics of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub snapshot_stride: usize,
    pub spacing: f64,
    pub snapshots: Vec<Snapshot>,
    /// One record per time level, starting with the initial data.
    pub records: Vec<StepRecord>,
    pub stability: StabilityReport,
}

impl Trajectory {
    pub fn final_state(&self) -> &StateVector {
        &self.snapshots.last().expect("trajectory has an initial snapshot").state
    }

    pub fn final_record(&self) -> &StepRecord {
        self.records.last().expect("trajectory has an initial record")
    }

    /// `(t, value)` pairs of one per-step diagnostic.
    pub fn series(&self, pick: impl Fn(&StepRecord) -> f64) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.t, pick(r))).collect()
    }
}

/// Result of advancing one step.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub state: StateVector,
    pub record: StepRecord,
    pub gate: BoundaryGate,
}

/// Face coefficients of all four species at the given state.
pub(crate) fn all_faces(state: &StateVector, params: &ModelParameters, grid: &Grid1D, time: f64) -> Result<[FaceCoefficients; 4]> {
    let mut out = Vec::with_capacity(4);
    for species in Species::ALL {
        let d = params.diffusion[species.index()];
        out.push(face_diffusion(
            state.field(species),
            |x, t, z| d.eval(x, t, z),
            grid,
            time,
            params.diffusion_floor,
        )?);
    }
    Ok(out.try_into().expect("four species"))
}

/// Advances `state` from `time` to `time + dt`.
#[allow(clippy::too_many_arguments)]
pub fn step(
    state: &StateVector,
    time: f64,
    dt: f64,
    params: &ModelParameters,
    grid: &Grid1D,
    scheme: Scheme,
    injection: &dyn Injection,
    config: &StepperConfig,
) -> Result<StepOutput> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(param("dt", format!("time step must be positive, got {dt}")));
    }
    let n = grid.cells();
    if state.cells() != n {
        return Err(Error::Dimension(format!("state has {} cells, grid has {n}", state.cells())));
    }
    let h = grid.spacing();

    let mut forcing: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
    for cell in 0..n {
        let site = Site::new(cell, grid.center(cell), time);
        let mut rates = eval_reactions(state.at(cell), params, site)?;
        if config.regularization > 0.0 {
            rates = regularize_reactions(rates, config.regularization)?;
        }
        for k in 0..4 {
            forcing[k][cell] = rates[k];
        }
    }
    let consumption = -forcing[3].iter().sum::<f64>() * h;

    let u = Species::Drug.index();
    let (v_left, v_right) = (injection.rate(Side::Left, time), injection.rate(Side::Right, time));
    let n_field = state.field(Species::Normal);
    let gate = apply_drug_boundary_flux(&mut forcing[u], v_left, v_right, n_field[0], n_field[n - 1], params, h)?;
    let influx = v_left * gate.left + v_right * gate.right;

    let faces = all_faces(state, params, grid, time)?;
    let mut fields: [Vec<f64>; 4] = Default::default();
    for species in Species::ALL {
        let k = species.index();
        let old = state.field(species);
        fields[k] = match scheme {
            Scheme::ImexBackwardEuler => {
                let rhs: Vec<f64> = old.iter().zip(&forcing[k]).map(|(z, f)| z + dt * f).collect();
                solve_implicit_diffusion(&rhs, &faces[k], h, dt)?
            }
            Scheme::ExplicitEuler => {
                let diff = apply_diffusion(old, &faces[k], h);
                old.iter()
                    .zip(&forcing[k])
                    .zip(&diff)
                    .map(|((z, f), d)| z + dt * (f + d))
                    .collect()
            }
        };
    }

    let mut clipped = [0.0; 4];
    let mut min_preclip = [0.0f64; 4];
    let mut clip_events = 0;
    for k in 0..4 {
        for value in fields[k].iter_mut() {
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    field: Species::ALL[k].label(),
                    value: *value,
                });
            }
            if *value < 0.0 {
                min_preclip[k] = min_preclip[k].min(*value);
                clipped[k] += -*value * h;
                if *value < -config.clip_tolerance {
                    clip_events += 1;
                }
                *value = 0.0;
            }
        }
    }

    let record = StepRecord {
        t: time + dt,
        dt,
        mass: std::array::from_fn(|k| mass(&fields[k], h)),
        sup: std::array::from_fn(|k| sup_norm(&fields[k])),
        influx,
        consumption,
        clipped,
        clip_events,
        min_preclip,
    };
    Ok(StepOutput {
        state: StateVector::from_fields_unchecked(fields),
        record,
        gate,
    })
}

/// Runs the full horizon and records the trajectory.
///
/// With `snapshot_stride == 1` every time level is stored, which is what
/// the sensitivity solver needs from a base run.
pub fn simulate(
    initial: &StateVector,
    params: &ModelParameters,
    grid: &Grid1D,
    config: &StepperConfig,
    injection: &dyn Injection,
) -> Result<Trajectory> {
    config.validate()?;
    params.validate(Some(grid.cells()))?;
    initial.validate()?;
    if initial.cells() != grid.cells() {
        return Err(Error::Dimension(format!(
            "initial data has {} cells, grid has {}",
            initial.cells(),
            grid.cells()
        )));
    }
    let h = grid.spacing();
    let times = time_grid(config.t_end, config.dt);
    let last = times.len() - 1;

    let mut traj = Trajectory {
        dt: config.dt,
        snapshot_stride: config.snapshot_stride,
        spacing: h,
        snapshots: vec![Snapshot {
            t: 0.0,
            state: initial.clone(),
        }],
        records: vec![StepRecord::initial(initial, h)],
        stability: stability_report(params, grid, config.dt, config.scheme),
    };

    let mut state = initial.clone();
    for n in 0..last {
        let (t0, t1) = (times[n], times[n + 1]);
        let out = step(&state, t0, t1 - t0, params, grid, config.scheme, injection, config)?;
        let mut record = out.record;
        record.t = t1;
        for species in Species::ALL {
            let sup = record.sup[species.index()];
            if sup > config.blowup_guard {
                return Err(Error::BlowUp {
                    time: t1,
                    species: species.label(),
                    sup,
                    guard: config.blowup_guard,
                });
            }
        }
        state = out.state;
        if (n + 1) % config.snapshot_stride == 0 || n + 1 == last {
            traj.snapshots.push(Snapshot {
                t: t1,
                state: state.clone(),
            });
        }
        traj.records.push(record);
    }
    Ok(traj)
}

/// Advisory step-size check; never blocks a run.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// `dt` times the largest explicit destruction rate estimate.
    pub reaction_product: f64,
    /// `h^2 / (2 max d)`, the explicit diffusion limit.
    pub diffusion_limit: f64,
    pub warnings: Vec<String>,
}

impl StabilityReport {
    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty()
    }
}

/// Estimates whether `dt` is small enough for the explicit parts of the scheme.
///
/// Destruction rates are bounded using concentrations at carrying capacity
/// (`1/b_i`) for the cells and the full `k2` range for the drug.
pub fn stability_report(params: &ModelParameters, grid: &Grid1D, dt: f64, scheme: Scheme) -> StabilityReport {
    let cap = params.inverse_capacity.map(|b| 1.0 / b);
    let r_max = params.growth.each_ref().map(|r| r.range().1);
    let (_, k2_max) = params.drug_consumption.range();
    let rates = [
        r_max[0] + params.normal_loss_to_tumor * cap[1] + params.drug_kill_normal,
        r_max[1] + params.tumor_kill_by_immune * cap[2] + params.tumor_loss_to_normal * cap[0] + params.drug_kill_tumor,
        r_max[2] + params.immune_loss_to_tumor * cap[1] + params.immune_death + params.drug_kill_immune,
        k2_max,
    ];
    let max_rate = rates.iter().cloned().fold(0.0, f64::max);
    let reaction_product = dt * max_rate;

    let z_caps = [cap[0], cap[1], cap[2], 1.0];
    let d_max = params
        .diffusion
        .iter()
        .zip(z_caps)
        .map(|(d, z)| d.max_over(z))
        .fold(0.0, f64::max);
    let h = grid.spacing();
    let diffusion_limit = h * h / (2.0 * d_max);

    let mut warnings = Vec::new();
    if reaction_product > 1.0 {
        warnings.push(format!(
            "dt * max destruction rate = {reaction_product:.3e} > 1; explicit reactions may overshoot and clip"
        ));
    }
    if scheme == Scheme::ExplicitEuler && dt > diffusion_limit {
        warnings.push(format!(
            "dt = {dt:.3e} exceeds explicit diffusion limit h^2/(2 max d) = {diffusion_limit:.3e}"
        ));
    }
    StabilityReport {
        reaction_product,
        diffusion_limit,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid1D {
        Grid1D::new(1.0, 16).unwrap()
    }

    #[test]
    fn time_grid_shapes() {
        assert_eq!(time_grid(0.0, 0.1), vec![0.0]);
        let t = time_grid(1.0, 0.25);
        assert_eq!(t, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let t = time_grid(1.0, 0.3);
        assert_eq!(t.len(), 5);
        assert_eq!(*t.last().unwrap(), 1.0);
        assert_eq!(time_grid(1.0, 0.1).len(), 11);
    }

    #[test]
    fn uniform_drug_decays_by_explicit_factor() {
        let g = grid();
        let p = ModelParameters::desk_default();
        let state = StateVector::uniform(g.cells(), [0.0, 0.0, 0.0, 1.0]).unwrap();
        let cfg = StepperConfig::new(0.1, 0.1);
        let out = step(&state, 0.0, 0.1, &p, &g, Scheme::ImexBackwardEuler, &InjectionProfile::Zero, &cfg).unwrap();
        for &u in out.state.field(Species::Drug) {
            assert!((u - 0.9).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_non_positive_dt() {
        let g = grid();
        let p = ModelParameters::desk_default();
        let state = StateVector::uniform(g.cells(), [0.5; 4]).unwrap();
        let cfg = StepperConfig::default();
        assert!(step(&state, 0.0, 0.0, &p, &g, Scheme::ImexBackwardEuler, &InjectionProfile::Zero, &cfg).is_err());
        assert!(StepperConfig::new(-1.0, 1.0).validate().is_err());
    }

    #[test]
    fn zero_horizon_keeps_only_initial() {
        let g = grid();
        let p = ModelParameters::desk_default();
        let init = StateVector::uniform(g.cells(), [0.9, 0.25, 0.25, 0.0]).unwrap();
        let traj = simulate(&init, &p, &g, &StepperConfig::new(0.01, 0.0), &InjectionProfile::Zero).unwrap();
        assert_eq!(traj.snapshots.len(), 1);
        assert_eq!(traj.records.len(), 1);
        assert_eq!(traj.snapshots[0].state, init);
    }

    #[test]
    fn blowup_guard_aborts() {
        let g = grid();
        let p = ModelParameters::desk_default();
        let init = StateVector::uniform(g.cells(), [0.9, 0.25, 0.25, 0.0]).unwrap();
        let mut cfg = StepperConfig::new(0.01, 1.0);
        cfg.blowup_guard = 0.5;
        assert!(matches!(
            simulate(&init, &p, &g, &cfg, &InjectionProfile::Zero),
            Err(Error::BlowUp { species: "N", .. })
        ));
    }

    #[test]
    fn stability_warnings() {
        let g = grid();
        let p = ModelParameters::desk_default();
        assert!(stability_report(&p, &g, 1e-9, Scheme::ImexBackwardEuler).is_clean());

        let mut only_drug = p.clone();
        only_drug.drug_consumption = 1.0.into();
        let r = stability_report(&only_drug, &g, 10.0, Scheme::ImexBackwardEuler);
        assert!(r.reaction_product >= 10.0);
        assert!(!r.is_clean());

        // h = 1/16, d = 0.1: limit = (1/256) / 0.2 = 0.01953125
        let r = stability_report(&p, &g, 0.02, Scheme::ExplicitEuler);
        assert!((r.diffusion_limit - 0.019_531_25).abs() < 1e-15);
        assert!(r.warnings.iter().any(|w| w.contains("diffusion")));
        let r = stability_report(&p, &g, 0.019, Scheme::ExplicitEuler);
        assert!(!r.warnings.iter().any(|w| w.contains("diffusion")));
        let r = stability_report(&p, &g, 0.02, Scheme::ImexBackwardEuler);
        assert!(!r.warnings.iter().any(|w| w.contains("diffusion")));
    }
}
