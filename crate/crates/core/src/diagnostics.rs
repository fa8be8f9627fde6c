//! Monitored quantities: masses, Lp norms, drug balance, decay rates, and the
//! periodic-treatment scenario with transient tumor growth.

use crate::error::{param, Error, Result};
use crate::grid::{gaussian_bump, Grid1D};
use crate::model::{Coefficient, Interpolation, ModelParameters, Schedule, StateVector};
use crate::stepper::{InjectionProfile, StepperConfig, Trajectory};

/// Midpoint-rule integral `sum field * h`.
pub fn mass(field: &[f64], h: f64) -> f64 {
    field.iter().sum::<f64>() * h
}

pub fn sup_norm(field: &[f64]) -> f64 {
    field.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Exponent of an Lp norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormOrder {
    Finite(f64),
    Infinity,
}

pub fn lp_norm(field: &[f64], h: f64, order: NormOrder) -> Result<f64> {
    match order {
        NormOrder::Infinity => Ok(sup_norm(field)),
        NormOrder::Finite(p) if p >= 1.0 && p.is_finite() => {
            let sum: f64 = field.iter().map(|v| v.abs().powf(p)).sum();
            Ok((sum * h).powf(1.0 / p))
        }
        NormOrder::Finite(p) => Err(param("p", format!("norm order must be >= 1, got {p}"))),
    }
}

/// Least-squares exponential fit `value ~ exp(intercept - rate * t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    /// Euclidean norm of the residuals of the log-linear fit.
    pub residual: f64,
}

/// Fits a line to `(t, ln value)` over the samples inside `window` (inclusive).
pub fn decay_rate_fit(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let points: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, _)| *t >= window.0 && *t <= window.1)
        .copied()
        .collect();
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "decay fit needs >= 3 samples in [{}, {}], found {}",
            window.0,
            window.1,
            points.len()
        )));
    }
    if let Some((t, v)) = points.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::InsufficientData(format!("non-positive value {v} at t = {t}")));
    }
    let m = points.len() as f64;
    let t_mean = points.iter().map(|p| p.0).sum::<f64>() / m;
    let y_mean = points.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let (mut stt, mut sty) = (0.0, 0.0);
    for &(t, v) in &points {
        let dt = t - t_mean;
        stt += dt * dt;
        sty += dt * (v.ln() - y_mean);
    }
    if stt == 0.0 {
        return Err(Error::InsufficientData("all samples share one time".into()));
    }
    let slope = sty / stt;
    let intercept = y_mean - slope * t_mean;
    let residual = points
        .iter()
        .map(|&(t, v)| {
            let r = v.ln() - (intercept + slope * t);
            r * r
        })
        .sum::<f64>()
        .sqrt();
    Ok(DecayFit {
        rate: -slope,
        intercept,
        window,
        residual,
    })
}

fn nearest(series: &[(f64, f64)], t: f64) -> f64 {
    series
        .iter()
        .min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
        .map(|p| p.1)
        .expect("non-empty series")
}

/// For each `j >= first_index` with `j * interval` inside the series, whether
/// the value at `j * interval` does not exceed the value one interval earlier.
pub fn envelope_check(series: &[(f64, f64)], interval: f64, first_index: usize) -> Result<Vec<bool>> {
    if !(interval > 0.0 && interval.is_finite()) {
        return Err(param("L", format!("treatment interval must be positive, got {interval}")));
    }
    if series.is_empty() {
        return Err(Error::InsufficientData("empty series".into()));
    }
    let t_last = series.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let j_max = (t_last / interval + 1e-9).floor() as usize;
    let first = first_index.max(1);
    Ok((first..=j_max)
        .map(|j| nearest(series, j as f64 * interval) <= nearest(series, (j - 1) as f64 * interval))
        .collect())
}

/// Relative per-step residual of the discrete drug balance
/// `dM = dt (influx - consumption) + clipped`, one entry per step.
pub fn drug_balance_residual(trajectory: &Trajectory) -> Vec<f64> {
    trajectory
        .records
        .windows(2)
        .map(|pair| {
            let (before, after) = (&pair[0], &pair[1]);
            let change = after.mass[3] - before.mass[3];
            let expected = after.dt * (after.influx - after.consumption) + after.clipped[3];
            let scale = before.mass[3]
                .abs()
                .max(after.mass[3].abs())
                .max(after.dt * after.influx.abs())
                .max(after.dt * after.consumption.abs());
            if scale == 0.0 {
                0.0
            } else {
                (change - expected).abs() / scale
            }
        })
        .collect()
}

/// Fully specified simulation inputs.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub params: ModelParameters,
    pub grid: Grid1D,
    pub initial: StateVector,
    pub stepper: StepperConfig,
    pub injection: InjectionProfile,
    /// Treatment interval used by the envelope check.
    pub interval: f64,
    pub notes: Vec<String>,
}

pub const JEFF_HIGH_RATE: f64 = 1.1;
pub const JEFF_LOW_RATE: f64 = 1e-4;

/// Tumor growth rate of the periodic treatment: 1.1 on `[k, k+0.6]`, 1e-4 on
/// `[k+0.7, k+1)`, linear in between, repeating with period 1.
pub fn jeff_growth_schedule() -> Schedule {
    Schedule::uniform(
        vec![0.0, 0.6, 0.7, 1.0],
        vec![JEFF_HIGH_RATE, JEFF_HIGH_RATE, JEFF_LOW_RATE, JEFF_LOW_RATE],
        Interpolation::Linear,
    )
    .and_then(|s| s.with_period(1.0))
    .expect("static schedule is valid")
}

/// Periodic-treatment scenario over `[0, 15]` with treatment interval 1.
///
/// Only the tumor growth schedule is prescribed; the geometry, initial
/// profiles, the decaying injection and all remaining coefficients are desk
/// choices recorded in `notes`.
pub fn jeff_scenario(base: &ModelParameters, grid: &Grid1D) -> Scenario {
    let mut params = base.clone();
    params.growth[1] = Coefficient::Scheduled(jeff_growth_schedule());
    params.growth_bounds.min = params.growth_bounds.min.min(JEFF_LOW_RATE);

    let n = grid.cells();
    let center = 0.5 * grid.length();
    let initial = StateVector::new(
        vec![0.5; n],
        gaussian_bump(grid, center, 0.15 * grid.length(), 0.3, 0.05),
        vec![0.1; n],
        vec![0.0; n],
    )
    .expect("desk initial data is non-negative");

    let stepper = StepperConfig {
        dt: 1e-3,
        t_end: 15.0,
        snapshot_stride: 100,
        ..StepperConfig::default()
    };
    Scenario {
        params,
        grid: grid.clone(),
        initial,
        stepper,
        injection: InjectionProfile::Exponential {
            amplitude: 0.2,
            decay: 0.2,
        },
        interval: 1.0,
        notes: vec![
            "tumor growth rate: 1.1 on [k, k+0.6], 1e-4 on [k+0.7, k+1], linear ramp between".into(),
            "desk choices: geometry, initial profiles (N=0.5, T=gaussian bump, I=0.1, U=0), injection 0.2 exp(-0.2 t), other coefficients".into(),
        ],
    }
}
