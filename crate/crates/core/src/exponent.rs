//! Stochastic exponential, time integral and super-exponent along one path.
//!
//! All accumulators use the left-point (Itô) rule on the driver's grid:
//!
//! ```text
//! logZ_{i+1} = logZ_i + X_i . dW_i - |X_i|^2 dt / 2
//! A_{i+1}    = A_i + |X_i|^2 exp(logZ_i) dt
//! Y_i        = exp(logZ_i) / (1/y + A_i / 2)
//! ```

use std::io::{self, Write};

use thiserror::Error;

use crate::expr::{DomainError, ProcessSpec};
use crate::path::{DriverPath, TimeGrid};

/// Per-path numerical failure. Estimators exclude such paths and count them.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("path {path_index}, step {step}: {source}")]
    Domain {
        path_index: u64,
        step: usize,
        source: DomainError,
    },
    #[error("path {path_index}, step {step}: non-finite value in {quantity}")]
    Overflow {
        path_index: u64,
        step: usize,
        quantity: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExponentError {
    #[error("initial value y must be positive and finite, got {0}")]
    InitialValue(f64),
    #[error("barrier N = {barrier} must exceed y = {y}")]
    Barrier { barrier: f64, y: f64 },
    #[error("process has dimension {spec}, driver path has dimension {path}")]
    Dimension { spec: usize, path: usize },
    #[error(transparent)]
    Path(#[from] PathError),
}

pub(crate) fn check_y(y: f64) -> Result<(), ExponentError> {
    if y > 0.0 && y.is_finite() {
        Ok(())
    } else {
        Err(ExponentError::InitialValue(y))
    }
}

#[inline]
pub(crate) fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `X(t_i)` for `i = 0..=n_steps`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessValues {
    dim: usize,
    values: Vec<f64>,
}

impl ProcessValues {
    pub fn from_rows(dim: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len() % dim, 0);
        ProcessValues { dim, values }
    }

    /// Evaluates a deterministic spec once on the grid; `w` is irrelevant.
    pub fn on_grid(spec: &ProcessSpec, grid: &TimeGrid) -> Result<Self, PathError> {
        let d = spec.dim();
        let zeros = vec![0.0; d];
        let mut values = vec![0.0; (grid.n_steps() + 1) * d];
        for (i, row) in values.chunks_exact_mut(d).enumerate() {
            spec.eval_into(grid.time(i), &zeros, row)
                .map_err(|source| PathError::Domain {
                    path_index: 0,
                    step: i,
                    source,
                })?;
        }
        Ok(ProcessValues { dim: d, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }
}

/// `X_i = f(t_i, W_i)` along the path.
pub fn eval_on_path(spec: &ProcessSpec, path: &DriverPath) -> Result<ProcessValues, ExponentError> {
    let d = spec.dim();
    if d != path.dim() {
        return Err(ExponentError::Dimension {
            spec: d,
            path: path.dim(),
        });
    }
    let grid = path.grid();
    let mut values = vec![0.0; (grid.n_steps() + 1) * d];
    for (i, row) in values.chunks_exact_mut(d).enumerate() {
        spec.eval_into(grid.time(i), path.value(i), row)
            .map_err(|source| PathError::Domain {
                path_index: path.path_index(),
                step: i,
                source,
            })?;
    }
    Ok(ProcessValues { dim: d, values })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentPaths {
    y: f64,
    log_z: Vec<f64>,
    integral: Vec<f64>,
    super_exp: Vec<f64>,
}

impl ExponentPaths {
    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn log_z(&self) -> &[f64] {
        &self.log_z
    }

    /// `A_i`, the time integral of `|X|^2 Z_X`.
    pub fn time_integral(&self) -> &[f64] {
        &self.integral
    }

    /// `Y_i` for the `y` these paths were built with.
    pub fn super_exponent(&self) -> &[f64] {
        &self.super_exp
    }

    /// `Y_{X,y'}(t_i)` for another initial value; `logZ` and `A` do not depend on `y`.
    pub fn super_exponent_for(&self, i: usize, y: f64) -> f64 {
        self.log_z[i].exp() / (1.0 / y + 0.5 * self.integral[i])
    }

    pub fn n_points(&self) -> usize {
        self.log_z.len()
    }
}

pub fn exponent_paths(
    x: &ProcessValues,
    path: &DriverPath,
    y: f64,
) -> Result<ExponentPaths, ExponentError> {
    check_y(y)?;
    let n = path.grid().n_steps();
    let dt = path.grid().dt();
    let mut log_z = Vec::with_capacity(n + 1);
    let mut integral = Vec::with_capacity(n + 1);
    let mut super_exp = Vec::with_capacity(n + 1);
    let (mut lz, mut a) = (0.0f64, 0.0f64);
    let inv_y = 1.0 / y;
    for i in 0..=n {
        let z = lz.exp();
        if !z.is_finite() || !a.is_finite() {
            return Err(overflow(path, i, "Z_X").into());
        }
        log_z.push(lz);
        integral.push(a);
        super_exp.push(if i == 0 { y } else { z / (inv_y + 0.5 * a) });
        if i < n {
            let xi = x.row(i);
            let q = norm_sq(xi);
            lz += dot(xi, path.increment(i)) - 0.5 * q * dt;
            a += q * z * dt;
        }
    }
    Ok(ExponentPaths {
        y,
        log_z,
        integral,
        super_exp,
    })
}

pub(crate) fn overflow(path: &DriverPath, step: usize, quantity: &'static str) -> PathError {
    PathError::Overflow {
        path_index: path.path_index(),
        step,
        quantity,
    }
}

/// Left-point Euler scheme for `dY = Y X . dW - |X|^2 Y^2 dt / 2`, `Y_0 = y`.
/// Not clamped at zero.
pub fn euler_super_sde(
    x: &ProcessValues,
    path: &DriverPath,
    y: f64,
) -> Result<Vec<f64>, ExponentError> {
    check_y(y)?;
    let n = path.grid().n_steps();
    let dt = path.grid().dt();
    let mut out = Vec::with_capacity(n + 1);
    let mut cur = y;
    out.push(cur);
    for i in 0..n {
        let xi = x.row(i);
        cur = cur + cur * dot(xi, path.increment(i)) - 0.5 * norm_sq(xi) * cur * cur * dt;
        out.push(cur);
    }
    Ok(out)
}

/// Stochastic exponential generated by `V_i = Y_i X_i`, which should track
/// `exp(Y_i - y)`.
pub fn transformed_exponential(
    x: &ProcessValues,
    exp_paths: &ExponentPaths,
    path: &DriverPath,
) -> Result<Vec<f64>, ExponentError> {
    let n = path.grid().n_steps();
    let dt = path.grid().dt();
    let d = x.dim();
    let mut v = vec![0.0; d];
    let mut out = Vec::with_capacity(n + 1);
    let mut lz = 0.0f64;
    for i in 0..=n {
        let z = lz.exp();
        if !z.is_finite() {
            return Err(overflow(path, i, "transformed exponential").into());
        }
        out.push(z);
        if i < n {
            let yi = exp_paths.super_exp[i];
            for (vk, xk) in v.iter_mut().zip(x.row(i)) {
                *vk = yi * xk;
            }
            lz += dot(&v, path.increment(i)) - 0.5 * norm_sq(&v) * dt;
        }
    }
    Ok(out)
}

/// `exp(Y_{i ∧ τ_N} - y)` where `τ_N` is the first grid index with `Y_i >= N`.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppedExponent {
    pub barrier: f64,
    /// `None` when the barrier is never reached on the grid.
    pub stop_index: Option<usize>,
    pub values: Vec<f64>,
}

pub fn stop_at_barrier(
    exp_paths: &ExponentPaths,
    barrier: f64,
) -> Result<StoppedExponent, ExponentError> {
    let y = exp_paths.y;
    if barrier.partial_cmp(&y) != Some(std::cmp::Ordering::Greater) {
        return Err(ExponentError::Barrier { barrier, y });
    }
    let stop_index = exp_paths.super_exp.iter().position(|&v| v >= barrier);
    let values = (0..exp_paths.n_points())
        .map(|i| {
            let j = stop_index.map_or(i, |s| i.min(s));
            (exp_paths.super_exp[j] - y).exp()
        })
        .collect();
    Ok(StoppedExponent {
        barrier,
        stop_index,
        values,
    })
}

/// Writes trace rows `path_index,i,t_i,logZ,A,Y,Y_euler`.
pub fn write_exponent_trace<W: Write>(
    out: &mut W,
    path: &DriverPath,
    exp_paths: &ExponentPaths,
    euler: &[f64],
    header: bool,
) -> io::Result<()> {
    use crate::fmt_real as r;
    if header {
        writeln!(out, "path_index,i,t_i,logZ,A,Y,Y_euler")?;
    }
    for (i, y_euler) in euler.iter().enumerate().take(exp_paths.n_points()) {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            path.path_index(),
            i,
            r(path.grid().time(i)),
            r(exp_paths.log_z[i]),
            r(exp_paths.integral[i]),
            r(exp_paths.super_exp[i]),
            r(*y_euler)
        )?;
    }
    Ok(())
}
