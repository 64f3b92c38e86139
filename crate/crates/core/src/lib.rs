//! Monte Carlo simulation of Brownian super-exponents.
//!
//! Given a generating process `X(t) = f(t, W(t))` the crate simulates the
//! stochastic exponential `Z_X`, the time integral `A(t) = ∫ |X|^2 Z_X du`
//! and the super-exponent `Y_{X,y}(t) = Z_X(t) / (1/y + A(t)/2)`, and checks
//! the identities they satisfy by Monte Carlo:
//!
//! - [`expr`]: the process expression language,
//! - [`path`]: time grids and reproducible Brownian paths,
//! - [`exponent`]: pathwise `Z_X`, `A`, `Y`, the Euler SDE solution and the stopped process,
//! - [`drift`]: the drift-shifted process and its explosion time,
//! - [`estimate`]: estimators and paired identity reports.

pub mod drift;
pub mod estimate;
pub mod exponent;
pub mod expr;
pub mod path;

pub use drift::{drift_shift_paths, DriftShiftPaths};
pub use estimate::{Estimate, GSpec, IdentityReport, McConfig, McError};
pub use exponent::{
    euler_super_sde, eval_on_path, exponent_paths, stop_at_barrier, transformed_exponential,
    ExponentPaths, ProcessValues,
};
pub use expr::{eval_process, parse_process, ProcessKind, ProcessSpec};
pub use path::{make_grid, sample_driver, DriverPath, TimeGrid};

/// Formats a real with 17 significant digits, enough to round-trip an `f64`.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}
