//! Drift-shifted generating process and its explosion time.
//!
//! For a Markov functional `X(t) = f(t, W(t))` the shifted process is built
//! forward on the grid, with the drift entering one step late:
//!
//! ```text
//! X'_i       = f(t_i, W_i + B_i)
//! logZ'_{i+1} = logZ'_i + X'_i . dW_i - |X'_i|^2 dt / 2
//! M_{i+1}    = M_i + |X'_i|^2 exp(logZ'_i) dt
//! Y'_i       = exp(logZ'_i) / (1/y - M_i / 2)
//! B_{i+1}    = B_i + Y'_i X'_i dt
//! ```
//!
//! The recursion stops at the first index where `M_i >= 2/y`, or where the
//! denominator `1/y - M_i/2` falls below [`STIFFNESS_FLOOR`].

use std::io::{self, Write};

use crate::exponent::{check_y, dot, eval_on_path, norm_sq, overflow, ExponentError, PathError};
use crate::expr::ProcessSpec;
use crate::path::DriverPath;

pub const STIFFNESS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DriftShiftPaths {
    dim: usize,
    y: f64,
    x_prime: Vec<f64>,
    drift: Vec<f64>,
    log_z: Vec<f64>,
    integral: Vec<f64>,
    super_exp: Vec<f64>,
    explosion: Option<usize>,
}

impl DriftShiftPaths {
    pub fn y(&self) -> f64 {
        self.y
    }

    /// Number of grid points computed: `explosion + 1`, or `n_steps + 1`.
    pub fn n_points(&self) -> usize {
        self.integral.len()
    }

    pub fn x_prime(&self, i: usize) -> &[f64] {
        &self.x_prime[i * self.dim..(i + 1) * self.dim]
    }

    /// Accumulated drift `B_i`.
    pub fn drift(&self, i: usize) -> &[f64] {
        &self.drift[i * self.dim..(i + 1) * self.dim]
    }

    pub fn log_z(&self) -> &[f64] {
        &self.log_z
    }

    /// `M_i = ∫_0^{t_i} |X'|^2 Z_{X'} du`.
    pub fn integral(&self) -> &[f64] {
        &self.integral
    }

    /// `Y'_i`, defined for indices before the explosion.
    pub fn super_exponent(&self) -> &[f64] {
        &self.super_exp
    }

    /// First grid index at which the denominator is exhausted.
    pub fn explosion_index(&self) -> Option<usize> {
        self.explosion
    }

    pub fn exploded_by(&self, i: usize) -> bool {
        self.explosion.is_some_and(|k| k <= i)
    }
}

pub fn drift_shift_paths(
    spec: &ProcessSpec,
    path: &DriverPath,
    y: f64,
) -> Result<DriftShiftPaths, ExponentError> {
    check_y(y)?;
    let d = spec.dim();
    if d != path.dim() {
        return Err(ExponentError::Dimension {
            spec: d,
            path: path.dim(),
        });
    }
    let grid = path.grid();
    let n = grid.n_steps();
    let dt = grid.dt();
    let inv_y = 1.0 / y;
    let limit = 2.0 / y;

    let mut out = DriftShiftPaths {
        dim: d,
        y,
        x_prime: Vec::with_capacity((n + 1) * d),
        drift: Vec::with_capacity((n + 1) * d),
        log_z: Vec::with_capacity(n + 1),
        integral: Vec::with_capacity(n + 1),
        super_exp: Vec::with_capacity(n + 1),
        explosion: None,
    };
    let mut b = vec![0.0; d];
    let mut shifted = vec![0.0; d];
    let mut xi = vec![0.0; d];
    let (mut lz, mut m) = (0.0f64, 0.0f64);

    for i in 0..=n {
        for ((s, w), bk) in shifted.iter_mut().zip(path.value(i)).zip(&b) {
            *s = w + bk;
        }
        spec.eval_into(grid.time(i), &shifted, &mut xi)
            .map_err(|source| PathError::Domain {
                path_index: path.path_index(),
                step: i,
                source,
            })?;
        out.x_prime.extend_from_slice(&xi);
        out.drift.extend_from_slice(&b);
        out.log_z.push(lz);
        out.integral.push(m);

        let den = inv_y - 0.5 * m;
        if m >= limit || den < STIFFNESS_FLOOR {
            out.explosion = Some(i);
            break;
        }
        let z = lz.exp();
        if !z.is_finite() || !m.is_finite() {
            return Err(overflow(path, i, "Z_X'").into());
        }
        let yp = if i == 0 { y } else { z / den };
        out.super_exp.push(yp);
        if i < n {
            let q = norm_sq(&xi);
            lz += dot(&xi, path.increment(i)) - 0.5 * q * dt;
            m += q * z * dt;
            for (bk, xk) in b.iter_mut().zip(&xi) {
                *bk += yp * xk * dt;
            }
        }
    }
    Ok(out)
}

/// `∫_0^{t_i} |X'|^2 Z_X du` with the exponent of the original (unshifted)
/// process, on the indices computed in `shifted`.
pub fn original_exponent_integral(
    spec: &ProcessSpec,
    path: &DriverPath,
    shifted: &DriftShiftPaths,
) -> Result<Vec<f64>, ExponentError> {
    let x = eval_on_path(spec, path)?;
    let dt = path.grid().dt();
    let mut out = Vec::with_capacity(shifted.n_points());
    let (mut lz, mut m) = (0.0f64, 0.0f64);
    for i in 0..shifted.n_points() {
        out.push(m);
        if i + 1 == shifted.n_points() {
            break;
        }
        let z = lz.exp();
        if !z.is_finite() {
            return Err(overflow(path, i, "Z_X").into());
        }
        lz += dot(x.row(i), path.increment(i)) - 0.5 * norm_sq(x.row(i)) * dt;
        m += norm_sq(shifted.x_prime(i)) * z * dt;
    }
    Ok(out)
}

/// Writes trace rows `path_index,i,t_i,X'_1..X'_d,B_1..B_d,M,exploded`.
pub fn write_drift_trace<W: Write>(
    out: &mut W,
    path: &DriverPath,
    shifted: &DriftShiftPaths,
    header: bool,
) -> io::Result<()> {
    use crate::fmt_real as r;
    let d = shifted.dim;
    if header {
        write!(out, "path_index,i,t_i")?;
        for k in 1..=d {
            write!(out, ",Xp_{k}")?;
        }
        for k in 1..=d {
            write!(out, ",B_{k}")?;
        }
        writeln!(out, ",M,exploded")?;
    }
    for i in 0..shifted.n_points() {
        write!(
            out,
            "{},{},{}",
            path.path_index(),
            i,
            r(path.grid().time(i))
        )?;
        for v in shifted.x_prime(i).iter().chain(shifted.drift(i)) {
            write!(out, ",{}", r(*v))?;
        }
        writeln!(
            out,
            ",{},{}",
            r(shifted.integral[i]),
            u8::from(shifted.exploded_by(i))
        )?;
    }
    Ok(())
}
