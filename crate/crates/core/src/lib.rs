//! Finite-volume solver for a reaction-diffusion model of normal, tumor and
//! immune cells under a chemotherapeutic drug injected through the boundary,
//! together with a projected-gradient optimizer for the injection schedule.
//!
//! Module map:
//! - [`model`]: coefficients, kinetics, Jacobian and the smoothed gate.
//! - [`grid`]: 1D grid, face coefficients, diffusion stencil, boundary flux.
//! - [`stepper`]: IMEX time stepping and trajectories.
//! - [`diagnostics`]: masses, norms, balance residuals, decay fits.
//! - [`control`]: cost, penalty, tangent-linear sensitivities and the optimizer.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod model;
pub mod stepper;

pub use error::{Error, Result};
pub use grid::Grid1D;
pub use model::{ModelParameters, Species, StateVector};
pub use stepper::{simulate, InjectionProfile, Side, StepperConfig, Trajectory};
