//! Finite transposition solvers for backward stochastic heat equations.
//!
//! The unknowns live in truncated Wiener-chaos spaces built from the
//! Brownian increments of a uniform time grid, with space discretized by the
//! Dirichlet sine basis on `(0, π)`. On top of the backward solver sit an
//! implicit forward solver, a stochastic linear-quadratic gradient method and
//! a minimum-energy null-control solver.

pub mod bsee;
pub mod chaos;
pub mod cli;
pub mod config;
mod error;
pub mod forward;
pub mod nullctrl;
pub mod rate;
pub mod slq;
pub mod spectral;

pub use error::{Error, Result};

/// Default seed for every Monte Carlo computation.
pub const DEFAULT_SEED: u64 = 0x5EED;
