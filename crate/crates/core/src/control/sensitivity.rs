//! Tangent-linear sensitivities of the discrete state equation.
//!
//! For a perturbation `v + s * dv` of the control, the derivative of every
//! time level with respect to `s` obeys the linearized scheme
//!
//! ```text
//! Z'_{n+1} = (I - dt D_n)^{-1} [ Z'_n + dt (J_n Z'_n + b'_n) ]
//! b'_n     = (dv H(N_b - a0) + v H'(N_b - a0) N'_b) / h   at the two boundary cells
//! ```
//!
//! where `J_n` is the reaction Jacobian and `D_n` the diffusion operator,
//! both evaluated along the stored base run. Starting data are zero. This is
//! the exact derivative of the forward map as long as the base run never
//! clipped and the diffusion coefficients do not depend on the state.

use crate::diagnostics::mass;
use crate::error::{Error, Result};
use crate::grid::{apply_diffusion, solve_implicit_diffusion};
use crate::model::{eval_reaction_jacobian, smoothstep, smoothstep_slope, Quad, Site, Species};
use crate::stepper::{all_faces, time_grid, Injection, Scheme, Side, Trajectory};

use super::ControlSetup;

/// Sensitivity fields at every time level of the base run.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRun {
    pub times: Vec<f64>,
    pub states: Vec<[Vec<f64>; 4]>,
    /// Integrated sensitivities per species and time level.
    pub masses: Vec<Quad>,
}

impl SensitivityRun {
    /// Directional derivative of the terminal tumor mass.
    pub fn terminal_tumor(&self) -> f64 {
        self.masses.last().expect("initial level")[Species::Tumor.index()]
    }
}

/// Integrates the linearized system along `base`, which must be a run of
/// `setup` under `v` with every time level stored.
pub fn sensitivity_solve(
    v: &dyn Injection,
    dv: &dyn Injection,
    base: &Trajectory,
    setup: &ControlSetup,
) -> Result<SensitivityRun> {
    let cfg = &setup.stepper;
    if base.dt != cfg.dt {
        return Err(Error::SensitivityMismatch(format!(
            "base run used dt = {}, setup uses dt = {}",
            base.dt, cfg.dt
        )));
    }
    let times = time_grid(cfg.t_end, cfg.dt);
    if base.snapshot_stride != 1 || base.snapshots.len() != times.len() {
        return Err(Error::SensitivityMismatch(format!(
            "base run must store all {} time levels, found {}",
            times.len(),
            base.snapshots.len()
        )));
    }
    if base.snapshots.iter().zip(&times).any(|(s, t)| s.t != *t) {
        return Err(Error::SensitivityMismatch("base run time levels differ from the setup".into()));
    }
    if cfg.regularization > 0.0 {
        return Err(Error::SensitivityMismatch(
            "sensitivities are not available with regularized reactions".into(),
        ));
    }

    let params = &setup.params;
    let grid = &setup.grid;
    let n = grid.cells();
    let h = grid.spacing();
    let last = n - 1;

    let mut current: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
    let mut states = Vec::with_capacity(times.len());
    let mut masses = Vec::with_capacity(times.len());
    states.push(current.clone());
    masses.push([0.0; 4]);

    for step in 0..times.len() - 1 {
        let (t0, t1) = (times[step], times[step + 1]);
        let dt = t1 - t0;
        let base_state = &base.snapshots[step].state;

        let mut forcing: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
        for cell in 0..n {
            let jac = eval_reaction_jacobian(base_state.at(cell), params, Site::new(cell, grid.center(cell), t0))?;
            for (row, out) in forcing.iter_mut().enumerate() {
                out[cell] = (0..4).map(|col| jac[row][col] * current[col][cell]).sum();
            }
        }

        let normal = base_state.field(Species::Normal);
        let normal_dot = &current[Species::Normal.index()];
        for (side, cell) in [(Side::Left, 0), (Side::Right, last)] {
            let z = normal[cell] - params.gate_threshold;
            let gate = smoothstep(z, params.gate_width);
            let slope = smoothstep_slope(z, params.gate_width);
            let flux = dv.rate(side, t0) * gate + v.rate(side, t0) * slope * normal_dot[cell];
            forcing[Species::Drug.index()][cell] += flux / h;
        }

        let faces = all_faces(base_state, params, grid, t0)?;
        let mut next: [Vec<f64>; 4] = Default::default();
        for k in 0..4 {
            next[k] = match cfg.scheme {
                Scheme::ImexBackwardEuler => {
                    let rhs: Vec<f64> = current[k].iter().zip(&forcing[k]).map(|(z, f)| z + dt * f).collect();
                    solve_implicit_diffusion(&rhs, &faces[k], h, dt)?
                }
                Scheme::ExplicitEuler => {
                    let diff = apply_diffusion(&current[k], &faces[k], h);
                    current[k]
                        .iter()
                        .zip(&forcing[k])
                        .zip(&diff)
                        .map(|((z, f), d)| z + dt * (f + d))
                        .collect()
                }
            };
        }
        current = next;
        masses.push(std::array::from_fn(|k| mass(&current[k], h)));
        states.push(current.clone());
    }

    Ok(SensitivityRun { times, states, masses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{desk_problem, InjectionSchedule, KnotSeries};

    #[test]
    fn zero_control_zero_direction_is_zero() {
        let desk = desk_problem();
        let zero = InjectionSchedule::new(KnotSeries::uniform(5.0, 4, 0.0).unwrap(), 2.0).unwrap();
        let base = desk.setup.run_dense(&zero).unwrap();
        let run = sensitivity_solve(&zero, zero.series(), &base, &desk.setup).unwrap();
        assert!(run.states.iter().flatten().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_mismatched_base() {
        let desk = desk_problem();
        let v = &desk.initial_control;
        let base = desk.setup.run_dense(v).unwrap();
        let mut other = desk.setup.clone();
        other.stepper.dt = 0.02;
        assert!(matches!(
            sensitivity_solve(v, v.series(), &base, &other),
            Err(Error::SensitivityMismatch(_))
        ));
        let sparse = desk.setup.run(v).unwrap();
        let mut strided = desk.setup.clone();
        strided.stepper.snapshot_stride = 10;
        let sparse2 = strided.run(v).unwrap();
        assert!(sensitivity_solve(v, v.series(), &sparse2, &desk.setup).is_err());
        // the default desk stepper stores every level
        assert!(sensitivity_solve(v, v.series(), &sparse, &desk.setup).is_ok());
    }
}
