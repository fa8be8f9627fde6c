use rayon::prelude::*;

use crate::error::{param, Result};

use super::sensitivity::sensitivity_solve;
use super::{evaluate_objective, penalty_beta_slope, report, ControlSetup, CostReport, InjectionSchedule, Objective};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMethod {
    /// One tangent-linear solve per control coordinate.
    Sensitivity,
    /// Central differences with step `1e-4 * upper`, one-sided at the box faces.
    FiniteDifference,
}

/// Gradient of the objective with respect to [`InjectionSchedule::coordinates`].
///
/// The `lambda * max(v)` term contributes `lambda` on the earliest coordinate
/// attaining the maximum. The penalty contributes through the mass that
/// attains the sampled constraint minimum.
pub fn gradient(
    v: &InjectionSchedule,
    setup: &ControlSetup,
    objective: &Objective,
    method: GradientMethod,
) -> Result<Vec<f64>> {
    objective.validate()?;
    match method {
        GradientMethod::Sensitivity => sensitivity_gradient(v, setup, objective),
        GradientMethod::FiniteDifference => finite_difference_gradient(v, setup, objective),
    }
}

fn sensitivity_gradient(v: &InjectionSchedule, setup: &ControlSetup, objective: &Objective) -> Result<Vec<f64>> {
    let base = setup.run_dense(v)?;
    let current = report(&base, v, objective)?;
    let penalty_slope = match &objective.penalty {
        Some(cp) => penalty_beta_slope(current.constraint_min.value, cp.constraints.threshold(), cp.penalty.eps)?,
        None => 0.0,
    };
    let at = current.constraint_min;

    let partials: Result<Vec<f64>> = (0..v.series().dimension())
        .into_par_iter()
        .map(|c| {
            let direction = v.series().indicator(c);
            let run = sensitivity_solve(v, &direction, &base, setup)?;
            let mut g = run.terminal_tumor();
            if penalty_slope != 0.0 {
                g += penalty_slope * run.masses[at.step][at.species.index()];
            }
            Ok(g)
        })
        .collect();
    let mut grad = partials?;
    add_sup_subgradient(&mut grad, &v.coordinates(), objective.lambda);
    Ok(grad)
}

fn add_sup_subgradient(grad: &mut [f64], coords: &[f64], lambda: f64) {
    if lambda == 0.0 || coords.is_empty() {
        return;
    }
    let max = coords.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let first = coords.iter().position(|&x| x == max).expect("non-empty");
    grad[first] += lambda;
}

fn finite_difference_gradient(v: &InjectionSchedule, setup: &ControlSetup, objective: &Objective) -> Result<Vec<f64>> {
    let upper = v.upper_bound();
    let step = 1e-4 * upper;
    let coords = v.coordinates();
    let cost = |x: &[f64]| -> Result<f64> {
        let w = v.projected(x)?;
        Ok(evaluate_objective(&w, setup, objective)?.total)
    };
    let center = cost(&coords)?;
    (0..coords.len())
        .into_par_iter()
        .map(|c| {
            let mut plus = coords.clone();
            let mut minus = coords.clone();
            plus[c] += step;
            minus[c] -= step;
            if minus[c] < 0.0 {
                Ok((cost(&plus)? - center) / step)
            } else if plus[c] > upper {
                Ok((center - cost(&minus)?) / step)
            } else {
                Ok((cost(&plus)? - cost(&minus)?) / (2.0 * step))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    pub max_iter: usize,
    /// Trial step length at the start of every line search.
    pub step0: f64,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
    /// Factor applied to the step after a rejected trial.
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Stop once the relative change of the accepted cost drops below this.
    pub rel_tol: f64,
    pub gradient: GradientMethod,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_iter: 25,
            step0: 50.0,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 20,
            rel_tol: 1e-6,
            gradient: GradientMethod::Sensitivity,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.step0 > 0.0 && self.step0.is_finite()) {
            return Err(param("step0", "must be positive"));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(param("armijo", "must lie in (0, 1)"));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(param("backtrack", "must lie in (0, 1)"));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(param("rel_tol", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub report: CostReport,
    /// Control coordinates of the accepted iterate.
    pub control: Vec<f64>,
    /// Accepted step length; 0 for the starting point.
    pub step_size: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    /// The projected gradient step does not move the iterate.
    Stationary,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub best: InjectionSchedule,
    /// Accepted iterates, starting with the initial control.
    pub history: Vec<IterationRecord>,
    pub iterations: usize,
    pub termination: Termination,
}

/// Projected gradient descent with Armijo backtracking.
///
/// Trial points are `P(v - a g)` with `P` the box projection; a trial is
/// accepted when `f(trial) <= f(v) + armijo * g . (trial - v)`.
pub fn optimize(
    v0: &InjectionSchedule,
    setup: &ControlSetup,
    objective: &Objective,
    options: &OptimizerOptions,
) -> Result<OptimizeResult> {
    options.validate()?;
    objective.validate()?;
    let mut v = v0.clone();
    let mut current = evaluate_objective(&v, setup, objective)?;
    let mut history = vec![IterationRecord {
        iter: 0,
        report: current.clone(),
        control: v.coordinates(),
        step_size: 0.0,
    }];
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    for iter in 1..=options.max_iter {
        iterations = iter;
        let grad = gradient(&v, setup, objective, options.gradient)?;
        let coords = v.coordinates();

        let mut step = options.step0;
        let mut accepted = None;
        let mut stationary = false;
        for _ in 0..=options.max_backtracks {
            let raw: Vec<f64> = coords.iter().zip(&grad).map(|(x, g)| x - step * g).collect();
            let trial = v.projected(&raw)?;
            let moved: Vec<f64> = trial.coordinates().iter().zip(&coords).map(|(a, b)| a - b).collect();
            if moved.iter().all(|&d| d == 0.0) {
                stationary = true;
                break;
            }
            let decrease: f64 = grad.iter().zip(&moved).map(|(g, d)| g * d).sum();
            if let Ok(r) = evaluate_objective(&trial, setup, objective) {
                if r.total <= current.total + options.armijo * decrease {
                    accepted = Some((trial, r));
                    break;
                }
            }
            step *= options.backtrack;
        }

        if stationary {
            termination = Termination::Stationary;
            break;
        }
        let Some((trial, r)) = accepted else {
            termination = Termination::LineSearchFailed;
            break;
        };
        let change = (current.total - r.total).abs() / current.total.abs().max(f64::MIN_POSITIVE);
        v = trial;
        current = r;
        history.push(IterationRecord {
            iter,
            report: current.clone(),
            control: v.coordinates(),
            step_size: step,
        });
        if change < options.rel_tol {
            termination = Termination::Converged;
            break;
        }
    }

    Ok(OptimizeResult {
        best: v,
        history,
        iterations,
        termination,
    })
}
