//! Uniform time grids and reproducible discretized Brownian paths.
//!
//! Every path is drawn from its own ChaCha8 stream: the 256-bit key is
//! expanded from the run seed with SplitMix64 and the stream id is the path
//! index. Increments are consumed step-major, component-minor, so a
//! `(seed, path_index)` pair fixes the whole path independently of every
//! other path. Normals come from the ziggurat sampler of `rand_distr`
//! (`StandardNormal`), pinned through the lockfile.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("horizon must be positive and finite, got {0}")]
    Horizon(f64),
    #[error("number of steps must be at least 1")]
    Steps,
    #[error("time {t} is not a point of the grid (horizon {horizon}, {n_steps} steps)")]
    OffGrid {
        t: f64,
        horizon: f64,
        n_steps: usize,
    },
    #[error("cannot coarsen {n_steps} steps by a factor of {factor}")]
    Coarsen { n_steps: usize, factor: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
    dt: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self, GridError> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(GridError::Horizon(horizon));
        }
        if n_steps == 0 {
            return Err(GridError::Steps);
        }
        Ok(TimeGrid {
            horizon,
            n_steps,
            dt: horizon / n_steps as f64,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `t_i = i * dt`, with the last point pinned to the horizon.
    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.horizon
        } else {
            i as f64 * self.dt
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.time(i)).collect()
    }

    /// Index of the grid point equal to `t` (up to rounding).
    pub fn index_of(&self, t: f64) -> Result<usize, GridError> {
        let off_grid = GridError::OffGrid {
            t,
            horizon: self.horizon,
            n_steps: self.n_steps,
        };
        if !(t >= 0.0 && t <= self.horizon * (1.0 + 1e-12)) {
            return Err(off_grid);
        }
        let i = (t / self.dt).round();
        if (i * self.dt - t).abs() > 1e-9 * self.dt.max(t) {
            return Err(off_grid);
        }
        Ok((i as usize).min(self.n_steps))
    }

    pub fn coarsen(&self, factor: usize) -> Result<TimeGrid, GridError> {
        if factor == 0 || !self.n_steps.is_multiple_of(factor) {
            return Err(GridError::Coarsen {
                n_steps: self.n_steps,
                factor,
            });
        }
        TimeGrid::new(self.horizon, self.n_steps / factor)
    }
}

pub fn make_grid(horizon: f64, n_steps: usize) -> Result<TimeGrid, GridError> {
    TimeGrid::new(horizon, n_steps)
}

/// One discretized d-dimensional Brownian path.
#[derive(Debug, Clone, PartialEq)]
pub struct DriverPath {
    grid: TimeGrid,
    dim: usize,
    /// `n_steps * dim`, row `i` holds `W_{i+1} - W_i`.
    increments: Vec<f64>,
    /// `(n_steps + 1) * dim`, row `i` holds `W_i`.
    values: Vec<f64>,
    seed: u64,
    path_index: u64,
}

impl DriverPath {
    /// Builds a path from explicit increments (row-major, `n_steps * dim`).
    pub fn from_increments(grid: TimeGrid, dim: usize, increments: Vec<f64>) -> Self {
        assert_eq!(increments.len(), grid.n_steps() * dim, "increment count");
        Self::assemble(grid, dim, increments, 0, 0)
    }

    pub fn zeros(grid: TimeGrid, dim: usize) -> Self {
        Self::from_increments(grid, dim, vec![0.0; grid.n_steps() * dim])
    }

    fn assemble(
        grid: TimeGrid,
        dim: usize,
        increments: Vec<f64>,
        seed: u64,
        path_index: u64,
    ) -> Self {
        let mut values = vec![0.0; (grid.n_steps() + 1) * dim];
        for i in 0..grid.n_steps() {
            for k in 0..dim {
                values[(i + 1) * dim + k] = values[i * dim + k] + increments[i * dim + k];
            }
        }
        DriverPath {
            grid,
            dim,
            increments,
            values,
            seed,
            path_index,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    /// `W_{i+1} - W_i`.
    pub fn increment(&self, i: usize) -> &[f64] {
        &self.increments[i * self.dim..(i + 1) * self.dim]
    }

    /// `W_i`.
    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// The same Brownian path observed on a grid `factor` times coarser.
    pub fn coarsen(&self, factor: usize) -> Result<DriverPath, GridError> {
        let grid = self.grid.coarsen(factor)?;
        let d = self.dim;
        let mut increments = vec![0.0; grid.n_steps() * d];
        for (i, row) in increments.chunks_exact_mut(d).enumerate() {
            for j in 0..factor {
                for (slot, dw) in row.iter_mut().zip(self.increment(i * factor + j)) {
                    *slot += dw;
                }
            }
        }
        Ok(Self::assemble(
            grid,
            d,
            increments,
            self.seed,
            self.path_index,
        ))
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a stream label into a seed; used to derive independent seed streams.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut state = seed ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03);
    splitmix64(&mut state);
    splitmix64(&mut state)
}

fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(path_index);
    rng
}

pub fn sample_driver(grid: &TimeGrid, dim: usize, seed: u64, path_index: u64) -> DriverPath {
    let mut rng = path_rng(seed, path_index);
    let scale = grid.dt().sqrt();
    let increments = (0..grid.n_steps() * dim)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    DriverPath::assemble(*grid, dim, increments, seed, path_index)
}

/// Writes paths as CSV rows `path_index,i,t_i,W_1..W_d`.
pub fn write_paths_csv<W: Write>(out: &mut W, paths: &[DriverPath]) -> io::Result<()> {
    let Some(first) = paths.first() else {
        return Ok(());
    };
    write!(out, "path_index,i,t_i")?;
    for k in 1..=first.dim() {
        write!(out, ",W_{k}")?;
    }
    writeln!(out)?;
    for path in paths {
        for i in 0..=path.grid().n_steps() {
            write!(
                out,
                "{},{},{}",
                path.path_index(),
                i,
                crate::fmt_real(path.grid().time(i))
            )?;
            for w in path.value(i) {
                write!(out, ",{}", crate::fmt_real(*w))?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}
