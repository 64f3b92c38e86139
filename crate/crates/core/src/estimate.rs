//! Monte Carlo estimators and the paired identity reports.
//!
//! Paths are processed in contiguous chunks of [`CHUNK_PATHS`] indices. Each
//! chunk accumulates its own running moments; chunks are merged in index
//! order, so every estimate is bitwise independent of the worker count.
//!
//! Identity reports evaluate the two sides on independent seed streams and
//! carry a discretization allowance: each side is also evaluated on the same
//! Brownian paths observed on a grid twice as coarse, and the allowance is
//! the change in `lhs - rhs` between the two resolutions.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::drift::{drift_shift_paths, original_exponent_integral};
use crate::exponent::{
    eval_on_path, exponent_paths, stop_at_barrier, ExponentError, ExponentPaths, PathError,
    ProcessValues,
};
use crate::expr::{parse_function, parse_process, DomainError, Expr, ParseError, ProcessSpec};
use crate::path::{derive_seed, sample_driver, DriverPath, GridError, TimeGrid};

pub const CHUNK_PATHS: u64 = 1000;
pub const MAX_EXCLUDED_FRACTION: f64 = 1e-3;
/// Number of combined standard errors an identity may be off by.
pub const Z_THRESHOLD: f64 = 3.0;

#[derive(Debug, Error)]
pub enum McError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("process cannot be evaluated: {0}")]
    Process(PathError),
    #[error(transparent)]
    Exponent(ExponentError),
    /// A per-path failure; such paths are excluded and counted.
    #[error(transparent)]
    Path(PathError),
    #[error("G is negative: G({u}) = {value}")]
    NegativeG { u: f64, value: f64 },
    #[error("G cannot be evaluated: {0}")]
    GDomain(DomainError),
    #[error("{excluded} of {n_paths} paths excluded (limit {limit}); first failure: {first}")]
    ExclusionQuota {
        excluded: u64,
        n_paths: u64,
        limit: f64,
        first: PathError,
    },
    #[error("failed to build worker pool: {0}")]
    Pool(String),
}

impl From<ExponentError> for McError {
    fn from(e: ExponentError) -> Self {
        match e {
            ExponentError::Path(p) => McError::Path(p),
            other => McError::Exponent(other),
        }
    }
}

/// Simulation settings shared by all estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub horizon: f64,
    pub n_steps: usize,
    pub n_paths: u64,
    pub seed: u64,
    /// Worker threads; 0 uses the available parallelism.
    pub workers: usize,
}

impl McConfig {
    pub fn new(horizon: f64, n_steps: usize, n_paths: u64, seed: u64) -> Self {
        McConfig {
            horizon,
            n_steps,
            n_paths,
            seed,
            workers: 0,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn grid(&self) -> Result<TimeGrid, McError> {
        Ok(TimeGrid::new(self.horizon, self.n_steps)?)
    }

    /// Seed of the independent stream used for the right-hand side of identities.
    pub fn rhs_seed(&self) -> u64 {
        derive_seed(self.seed, 1)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: u64,
    pub n_excluded: u64,
}

impl Estimate {
    fn from_moments(m: &Moments, n_paths: u64, n_excluded: u64) -> Self {
        let std_error = if m.n > 1 {
            (m.m2.max(0.0) / (m.n - 1) as f64 / m.n as f64).sqrt()
        } else {
            0.0
        };
        Estimate {
            mean: m.mean,
            std_error,
            n_paths,
            n_excluded,
        }
    }

    pub fn ci95(&self) -> (f64, f64) {
        (
            self.mean - 1.96 * self.std_error,
            self.mean + 1.96 * self.std_error,
        )
    }

    /// Multiplies the estimator by a constant.
    pub fn scaled(&self, factor: f64) -> Estimate {
        Estimate {
            mean: self.mean * factor,
            std_error: self.std_error * factor.abs(),
            ..*self
        }
    }
}

pub fn combined_se(a: &Estimate, b: &Estimate) -> f64 {
    a.std_error.hypot(b.std_error)
}

/// Two estimates of the same quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    pub lhs: Estimate,
    pub rhs: Estimate,
    /// `(lhs - rhs) / sqrt(se_l^2 + se_r^2)`.
    pub z: f64,
    /// Discretization allowance added to the tolerance.
    pub allowance: f64,
    pub pass: bool,
}

impl IdentityReport {
    pub fn new(lhs: Estimate, rhs: Estimate, allowance: f64) -> Self {
        let diff = lhs.mean - rhs.mean;
        let se = combined_se(&lhs, &rhs);
        let z = if se > 0.0 {
            diff / se
        } else if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
        let pass = diff.abs() <= Z_THRESHOLD * se + allowance;
        IdentityReport {
            lhs,
            rhs,
            z,
            allowance,
            pass,
        }
    }
}

/// An estimate expected to equal one (a martingale started at one).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleReport {
    pub estimate: Estimate,
    pub allowance: f64,
    pub pass: bool,
}

impl MartingaleReport {
    fn new(estimate: Estimate, allowance: f64) -> Self {
        let pass = (estimate.mean - 1.0).abs() <= Z_THRESHOLD * estimate.std_error + allowance;
        MartingaleReport {
            estimate,
            allowance,
            pass,
        }
    }

    /// `(mean - 1) / se`.
    pub fn z(&self) -> f64 {
        IdentityReport::new(
            self.estimate,
            Estimate {
                mean: 1.0,
                std_error: 0.0,
                n_paths: 0,
                n_excluded: 0,
            },
            0.0,
        )
        .z
    }
}

/// Non-negative test function `G(u)`, `u > 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum GSpec {
    One,
    Identity,
    Indicator(f64),
    Capped(f64),
    Expr(Expr),
}

impl GSpec {
    pub fn eval(&self, u: f64) -> Result<f64, McError> {
        let v = match self {
            GSpec::One => 1.0,
            GSpec::Identity => u,
            GSpec::Indicator(c) => f64::from(u8::from(u <= *c)),
            GSpec::Capped(c) => u.min(*c),
            GSpec::Expr(e) => e.eval(0.0, &[], u).map_err(McError::GDomain)?,
        };
        if v < 0.0 || v.is_nan() {
            return Err(McError::NegativeG { u, value: v });
        }
        Ok(v)
    }

    /// Samples `G` on 10^4 evenly spaced points of `[lo, hi]`.
    pub fn check_nonnegative(&self, lo: f64, hi: f64) -> Result<(), McError> {
        if !matches!(self, GSpec::Expr(_)) {
            return Ok(());
        }
        const SAMPLES: usize = 10_000;
        for k in 0..SAMPLES {
            let u = lo + (hi - lo) * k as f64 / (SAMPLES - 1) as f64;
            self.eval(u)?;
        }
        Ok(())
    }
}

impl FromStr for GSpec {
    type Err = McError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let arg = |prefix: &str| -> Option<Result<f64, McError>> {
            let inner = s
                .strip_prefix(prefix)?
                .strip_prefix('(')?
                .strip_suffix(')')?;
            Some(
                inner
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| McError::Config(format!("bad constant in G `{s}`"))),
            )
        };
        match s {
            "one" => return Ok(GSpec::One),
            "identity" => return Ok(GSpec::Identity),
            _ => {}
        }
        if let Some(c) = arg("indicator") {
            return Ok(GSpec::Indicator(c?));
        }
        if let Some(c) = arg("capped") {
            return Ok(GSpec::Capped(c?));
        }
        Ok(GSpec::Expr(parse_function(s)?))
    }
}

impl fmt::Display for GSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GSpec::One => f.write_str("one"),
            GSpec::Identity => f.write_str("identity"),
            GSpec::Indicator(c) => write!(f, "indicator({c})"),
            GSpec::Capped(c) => write!(f, "capped({c})"),
            GSpec::Expr(e) => write!(f, "{e}"),
        }
    }
}

struct ChunkStats {
    moments: Vec<Moments>,
    excluded: u64,
    first_failure: Option<PathError>,
}

fn run_chunks<F>(
    grid: &TimeGrid,
    dim: usize,
    seed: u64,
    n_paths: u64,
    workers: usize,
    outputs: usize,
    f: F,
) -> Result<Vec<ChunkStats>, McError>
where
    F: Fn(&DriverPath, &mut [f64]) -> Result<(), McError> + Sync,
{
    if n_paths == 0 {
        return Err(McError::Config("number of paths must be positive".into()));
    }
    let n_chunks = n_paths.div_ceil(CHUNK_PATHS);
    let chunk = |c: u64| -> Result<ChunkStats, McError> {
        let mut stats = ChunkStats {
            moments: vec![Moments::default(); outputs],
            excluded: 0,
            first_failure: None,
        };
        let mut buf = vec![0.0; outputs];
        let end = ((c + 1) * CHUNK_PATHS).min(n_paths);
        for idx in c * CHUNK_PATHS..end {
            let path = sample_driver(grid, dim, seed, idx);
            match f(&path, &mut buf) {
                Ok(()) => {
                    for (m, v) in stats.moments.iter_mut().zip(&buf) {
                        m.push(*v);
                    }
                }
                Err(McError::Path(p)) => {
                    stats.excluded += 1;
                    stats.first_failure.get_or_insert(p);
                }
                Err(other) => return Err(other),
            }
        }
        Ok(stats)
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if workers > 0 {
        builder = builder.num_threads(workers);
    }
    let pool = builder.build().map_err(|e| McError::Pool(e.to_string()))?;
    pool.install(|| (0..n_chunks).into_par_iter().map(chunk).collect())
}

fn reduce(chunks: &[ChunkStats], outputs: usize) -> Result<Vec<Estimate>, McError> {
    let mut total = vec![Moments::default(); outputs];
    let mut excluded = 0;
    let mut first = None;
    for c in chunks {
        for (t, m) in total.iter_mut().zip(&c.moments) {
            t.merge(m);
        }
        excluded += c.excluded;
        if first.is_none() {
            first = c.first_failure.clone();
        }
    }
    let n_paths = total.first().map_or(0, |m| m.n) + excluded;
    if excluded as f64 > MAX_EXCLUDED_FRACTION * n_paths as f64 {
        return Err(McError::ExclusionQuota {
            excluded,
            n_paths,
            limit: MAX_EXCLUDED_FRACTION,
            first: first.expect("excluded paths record a failure"),
        });
    }
    Ok(total
        .iter()
        .map(|m| Estimate::from_moments(m, n_paths, excluded))
        .collect())
}

/// Estimates the means of `outputs` per-path functionals over paths
/// `0..n_paths` of the given seed.
pub fn estimate_many<F>(
    grid: &TimeGrid,
    dim: usize,
    seed: u64,
    n_paths: u64,
    workers: usize,
    outputs: usize,
    f: F,
) -> Result<Vec<Estimate>, McError>
where
    F: Fn(&DriverPath, &mut [f64]) -> Result<(), McError> + Sync,
{
    let chunks = run_chunks(grid, dim, seed, n_paths, workers, outputs, f)?;
    reduce(&chunks, outputs)
}

/// Deterministic specs are evaluated once per grid resolution.
struct ProcessCache<'a> {
    spec: &'a ProcessSpec,
    grids: Vec<(usize, ProcessValues)>,
}

impl<'a> ProcessCache<'a> {
    fn new(spec: &'a ProcessSpec, grid: &TimeGrid, coarse: bool) -> Result<Self, McError> {
        let mut grids = Vec::new();
        if spec.is_deterministic() {
            grids.push((
                grid.n_steps(),
                ProcessValues::on_grid(spec, grid).map_err(McError::Process)?,
            ));
            if coarse {
                let g = grid.coarsen(2)?;
                grids.push((
                    g.n_steps(),
                    ProcessValues::on_grid(spec, &g).map_err(McError::Process)?,
                ));
            }
        }
        Ok(ProcessCache { spec, grids })
    }

    fn values(&self, path: &DriverPath) -> Result<Cow<'_, ProcessValues>, McError> {
        let n = path.grid().n_steps();
        match self.grids.iter().find(|(k, _)| *k == n) {
            Some((_, v)) => Ok(Cow::Borrowed(v)),
            None => Ok(Cow::Owned(eval_on_path(self.spec, path)?)),
        }
    }

    fn exponent(
        &self,
        path: &DriverPath,
        y: f64,
    ) -> Result<(Cow<'_, ProcessValues>, ExponentPaths), McError> {
        let x = self.values(path)?;
        let e = exponent_paths(&x, path, y)?;
        Ok((x, e))
    }
}

/// One simulated path with its generating-process values and exponent arrays.
pub struct PathSample<'a> {
    pub path: &'a DriverPath,
    pub x: &'a ProcessValues,
    pub exponent: &'a ExponentPaths,
}

fn require_positive(name: &str, v: f64) -> Result<(), McError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(McError::Config(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn require_deterministic(spec: &ProcessSpec, what: &str) -> Result<(), McError> {
    if spec.is_deterministic() {
        Ok(())
    } else {
        Err(McError::Precondition(format!(
            "{what} requires a deterministic process, `{}` depends on w",
            spec.source()
        )))
    }
}

fn require_even(grid: &TimeGrid) -> Result<(), McError> {
    if grid.n_steps().is_multiple_of(2) {
        Ok(())
    } else {
        Err(McError::Config(format!(
            "the discretization pilot needs an even number of steps, got {}",
            grid.n_steps()
        )))
    }
}

/// Mean of a scalar functional of each simulated path.
pub fn mc_estimate<F>(spec: &ProcessSpec, y: f64, cfg: &McConfig, f: F) -> Result<Estimate, McError>
where
    F: Fn(&PathSample<'_>) -> f64 + Sync,
{
    require_positive("y", y)?;
    let grid = cfg.grid()?;
    let cache = ProcessCache::new(spec, &grid, false)?;
    let out = estimate_many(
        &grid,
        spec.dim(),
        cfg.seed,
        cfg.n_paths,
        cfg.workers,
        1,
        |path, buf| {
            let (x, e) = cache.exponent(path, y)?;
            buf[0] = f(&PathSample {
                path,
                x: &x,
                exponent: &e,
            });
            Ok(())
        },
    )?;
    Ok(out[0])
}

/// Runs `f` on each path and on the same path at half resolution; `f`
/// returns the grid index of `t` for the resolution it was given.
fn fine_and_coarse<F>(
    spec: &ProcessSpec,
    grid: &TimeGrid,
    seed: u64,
    cfg: &McConfig,
    outputs: usize,
    f: F,
) -> Result<(Vec<Estimate>, Vec<Estimate>), McError>
where
    F: Fn(&DriverPath, &ProcessCache<'_>, &mut [f64]) -> Result<(), McError> + Sync,
{
    require_even(grid)?;
    let cache = ProcessCache::new(spec, grid, true)?;
    let est = estimate_many(
        grid,
        spec.dim(),
        seed,
        cfg.n_paths,
        cfg.workers,
        2 * outputs,
        |path, buf| {
            let (fine, coarse) = buf.split_at_mut(outputs);
            f(path, &cache, fine)?;
            let c = path.coarsen(2)?;
            f(&c, &cache, coarse)
        },
    )?;
    let coarse = est[outputs..].to_vec();
    let mut fine = est;
    fine.truncate(outputs);
    Ok((fine, coarse))
}

fn t_index(path: &DriverPath, t: f64) -> Result<usize, McError> {
    Ok(path.grid().index_of(t)?)
}

/// `E[exp(Y(t ∧ τ_N) - y)]` with its discretization allowance; `barrier`
/// `None` means no stopping.
pub fn martingale_check(
    spec: &ProcessSpec,
    y: f64,
    t: f64,
    barrier: Option<f64>,
    cfg: &McConfig,
) -> Result<MartingaleReport, McError> {
    require_positive("y", y)?;
    let grid = cfg.grid()?;
    grid.index_of(t)?;
    grid.coarsen(2)?.index_of(t)?;
    if let Some(n) = barrier {
        if n.partial_cmp(&y) != Some(std::cmp::Ordering::Greater) {
            return Err(McError::Config(format!("barrier {n} must exceed y = {y}")));
        }
    }
    let (fine, coarse) = fine_and_coarse(spec, &grid, cfg.seed, cfg, 1, |path, cache, out| {
        let i = t_index(path, t)?;
        let (_, e) = cache.exponent(path, y)?;
        out[0] = match barrier {
            Some(n) => stop_at_barrier(&e, n)?.values[i],
            None => (e.super_exponent()[i] - y).exp(),
        };
        Ok(())
    })?;
    Ok(MartingaleReport::new(
        fine[0],
        (fine[0].mean - coarse[0].mean).abs(),
    ))
}

fn paired(
    lhs: (Vec<Estimate>, Vec<Estimate>),
    rhs: (Vec<Estimate>, Vec<Estimate>),
) -> Vec<IdentityReport> {
    let (lf, lc) = lhs;
    let (rf, rc) = rhs;
    (0..lf.len())
        .map(|k| {
            let allowance = ((lf[k].mean - rf[k].mean) - (lc[k].mean - rc[k].mean)).abs();
            IdentityReport::new(lf[k], rf[k], allowance)
        })
        .collect()
}

/// For deterministic X, compares
/// `E[G(Y(t)) exp(Y(t) - y)]` with `E[G(Z(t) / (1/y - A(t)/2)); A(t) < 2/y]`,
/// one report per `G`.
pub fn identity_report(
    spec: &ProcessSpec,
    gs: &[GSpec],
    y: f64,
    t: f64,
    cfg: &McConfig,
) -> Result<Vec<IdentityReport>, McError> {
    require_deterministic(spec, "the time-distribution identity")?;
    require_positive("y", y)?;
    let grid = cfg.grid()?;
    grid.index_of(t)?;
    grid.coarsen(2)?.index_of(t)?;
    check_g_range(spec, gs, y, t, cfg)?;
    let limit = 2.0 / y;
    let inv_y = 1.0 / y;
    let k = gs.len();
    let lhs = fine_and_coarse(spec, &grid, cfg.seed, cfg, k, |path, cache, out| {
        let i = t_index(path, t)?;
        let (_, e) = cache.exponent(path, y)?;
        let yt = e.super_exponent()[i];
        let w = (yt - y).exp();
        for (slot, g) in out.iter_mut().zip(gs) {
            *slot = g.eval(yt)? * w;
        }
        Ok(())
    })?;
    let rhs = fine_and_coarse(spec, &grid, cfg.rhs_seed(), cfg, k, |path, cache, out| {
        let i = t_index(path, t)?;
        let (_, e) = cache.exponent(path, y)?;
        let a = e.time_integral()[i];
        if a < limit {
            let u = e.log_z()[i].exp() / (inv_y - 0.5 * a);
            for (slot, g) in out.iter_mut().zip(gs) {
                *slot = g.eval(u)?;
            }
        } else {
            out.fill(0.0);
        }
        Ok(())
    })?;
    Ok(paired(lhs, rhs))
}

/// Checks expression-valued `G` for negativity on the range of arguments seen
/// in a 256-path pilot.
fn check_g_range(
    spec: &ProcessSpec,
    gs: &[GSpec],
    y: f64,
    t: f64,
    cfg: &McConfig,
) -> Result<(), McError> {
    if !gs.iter().any(|g| matches!(g, GSpec::Expr(_))) {
        return Ok(());
    }
    let grid = cfg.grid()?;
    let cache = ProcessCache::new(spec, &grid, false)?;
    let i = grid.index_of(t)?;
    let (mut lo, mut hi) = (y, y);
    for idx in 0..256u64.min(cfg.n_paths) {
        let path = sample_driver(&grid, spec.dim(), cfg.seed, idx);
        let Ok((_, e)) = cache.exponent(&path, y) else {
            continue;
        };
        let mut track = |u: f64| {
            if u.is_finite() {
                lo = lo.min(u);
                hi = hi.max(u);
            }
        };
        track(e.super_exponent()[i]);
        let a = e.time_integral()[i];
        if a < 2.0 / y {
            track(e.log_z()[i].exp() / (1.0 / y - 0.5 * a));
        }
    }
    gs.iter().try_for_each(|g| g.check_nonnegative(lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub t: f64,
    pub estimate: Estimate,
}

/// `E[exp(Y(t))]` at each requested time, on common paths.
pub fn supermartingale_curve(
    spec: &ProcessSpec,
    y: f64,
    times: &[f64],
    cfg: &McConfig,
) -> Result<Vec<CurvePoint>, McError> {
    require_deterministic(spec, "the supermartingale curve")?;
    require_positive("y", y)?;
    let grid = cfg.grid()?;
    let x = ProcessValues::on_grid(spec, &grid).map_err(McError::Process)?;
    if (0..grid.n_steps()).any(|i| x.row(i).iter().all(|&v| v == 0.0)) {
        return Err(McError::Precondition(
            "∫|X|^2 du is not strictly increasing: X vanishes on a grid step".into(),
        ));
    }
    let idx = times
        .iter()
        .map(|&t| grid.index_of(t))
        .collect::<Result<Vec<_>, _>>()?;
    let est = estimate_many(
        &grid,
        spec.dim(),
        cfg.seed,
        cfg.n_paths,
        cfg.workers,
        idx.len(),
        |path, out| {
            let e = exponent_paths(&x, path, y)?;
            for (slot, &i) in out.iter_mut().zip(&idx) {
                *slot = e.super_exponent()[i].exp();
            }
            Ok(())
        },
    )?;
    Ok(times
        .iter()
        .zip(est)
        .map(|(&t, estimate)| CurvePoint { t, estimate })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfPoint {
    pub a: f64,
    /// `P{A(t) < a}`.
    pub cdf: Estimate,
    /// `exp(2/a) P{A(t) < a}`.
    pub factor: Estimate,
    /// `exp(-2/a) E[exp(Y_{X,2/a}(t))]`, estimated on the same paths.
    pub remark: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfCurve {
    pub t: f64,
    pub points: Vec<CdfPoint>,
}

/// Empirical distribution of the time integral `A(t)` on a threshold grid.
pub fn cdf_time_integral(
    spec: &ProcessSpec,
    t: f64,
    a_grid: &[f64],
    cfg: &McConfig,
) -> Result<CdfCurve, McError> {
    require_deterministic(spec, "the time-integral distribution")?;
    if a_grid.is_empty() {
        return Err(McError::Config("threshold grid is empty".into()));
    }
    for a in a_grid {
        require_positive("threshold a", *a)?;
    }
    if a_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(McError::Config(
            "thresholds must be strictly increasing".into(),
        ));
    }
    let grid = cfg.grid()?;
    let i = grid.index_of(t)?;
    let x = ProcessValues::on_grid(spec, &grid).map_err(McError::Process)?;
    let k = a_grid.len();
    let est = estimate_many(
        &grid,
        spec.dim(),
        cfg.seed,
        cfg.n_paths,
        cfg.workers,
        2 * k,
        |path, out| {
            // y only scales Y; A and logZ are shared across thresholds
            let e = exponent_paths(&x, path, 1.0)?;
            let a_t = e.time_integral()[i];
            for (j, &a) in a_grid.iter().enumerate() {
                out[j] = f64::from(u8::from(a_t < a));
                out[k + j] = (e.super_exponent_for(i, 2.0 / a) - 2.0 / a).exp();
            }
            Ok(())
        },
    )?;
    let points = a_grid
        .iter()
        .enumerate()
        .map(|(j, &a)| CdfPoint {
            a,
            cdf: est[j],
            factor: est[j].scaled((2.0 / a).exp()),
            remark: est[k + j],
        })
        .collect();
    Ok(CdfCurve { t, points })
}

/// The geometric Brownian motion special case (`d = 1`, `X ≡ 1`):
/// `P{∫_0^t exp(W - u/2) du <= a}` against
/// `exp(-2/a) E[exp(2 exp(W(t) - t/2) / (a + ∫_0^t exp(W - u/2) du))]`.
pub fn gk_identity_check(t: f64, a: f64, cfg: &McConfig) -> Result<IdentityReport, McError> {
    require_positive("a", a)?;
    let spec = parse_process("1", 1)?;
    let grid = cfg.grid()?;
    grid.index_of(t)?;
    grid.coarsen(2)?.index_of(t)?;
    let lhs = fine_and_coarse(&spec, &grid, cfg.seed, cfg, 1, |path, cache, out| {
        let i = t_index(path, t)?;
        let (_, e) = cache.exponent(path, 1.0)?;
        out[0] = f64::from(u8::from(e.time_integral()[i] <= a));
        Ok(())
    })?;
    let rhs = fine_and_coarse(&spec, &grid, cfg.rhs_seed(), cfg, 1, |path, cache, out| {
        let i = t_index(path, t)?;
        let (_, e) = cache.exponent(path, 1.0)?;
        let z = e.log_z()[i].exp();
        out[0] = (-2.0 / a).exp() * (2.0 * z / (a + e.time_integral()[i])).exp();
        Ok(())
    })?;
    Ok(paired(lhs, rhs).remove(0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeRow {
    pub n_paths: u64,
    pub estimate: Estimate,
}

/// Running estimates of `E[2 Z(t) / A(t)]` on nested prefixes of one path
/// sequence. Exploratory: the mean may be infinite, so nothing is asserted.
pub fn conjecture_probe(
    spec: &ProcessSpec,
    t: f64,
    checkpoints: &[u64],
    cfg: &McConfig,
) -> Result<Vec<ProbeRow>, McError> {
    require_deterministic(spec, "the conjecture probe")?;
    let grid = cfg.grid()?;
    let i = grid.index_of(t)?;
    if i == 0 {
        return Err(McError::Precondition("t must be positive".into()));
    }
    let x = ProcessValues::on_grid(spec, &grid).map_err(McError::Process)?;
    if (0..i).all(|k| x.row(k).iter().all(|&v| v == 0.0)) {
        return Err(McError::Precondition(
            "A(t) ≡ 0 for this process, the ratio is undefined".into(),
        ));
    }
    let max = checkpoints.iter().copied().max().unwrap_or(0);
    if let Some(bad) = checkpoints
        .iter()
        .find(|&&n| n == 0 || (n % CHUNK_PATHS != 0 && n != max))
    {
        return Err(McError::Config(format!(
            "checkpoint {bad} must be a positive multiple of {CHUNK_PATHS}"
        )));
    }
    let chunks = run_chunks(
        &grid,
        spec.dim(),
        cfg.seed,
        max,
        cfg.workers,
        1,
        |path, out| {
            let e = exponent_paths(&x, path, 1.0)?;
            out[0] = 2.0 * e.log_z()[i].exp() / e.time_integral()[i];
            Ok(())
        },
    )?;
    checkpoints
        .iter()
        .map(|&n| {
            let used = n.div_ceil(CHUNK_PATHS) as usize;
            Ok(ProbeRow {
                n_paths: n,
                estimate: reduce(&chunks[..used], 1)?[0],
            })
        })
        .collect()
}

/// Which exponent weighs the drift-shifted integral in the martingale condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MartVariant {
    /// `∫|X'|^2 Z_{X'} du`, the integral whose exhaustion defines the explosion.
    Shifted,
    /// `∫|X'|^2 Z_X du`, weighting by the exponent of the original process.
    Original,
}

impl FromStr for MartVariant {
    type Err = McError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shifted" | "zxprime" => Ok(MartVariant::Shifted),
            "original" | "zx" => Ok(MartVariant::Original),
            other => Err(McError::Config(format!("unknown variant `{other}`"))),
        }
    }
}

impl fmt::Display for MartVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MartVariant::Shifted => "shifted",
            MartVariant::Original => "original",
        })
    }
}

/// `P(τ ≤ t)` for the explosion time of the drift-shifted process.
pub fn explosion_probability(
    spec: &ProcessSpec,
    y: f64,
    t: f64,
    cfg: &McConfig,
) -> Result<Estimate, McError> {
    require_positive("y", y)?;
    let grid = cfg.grid()?;
    let i = grid.index_of(t)?;
    let out = estimate_many(
        &grid,
        spec.dim(),
        cfg.seed,
        cfg.n_paths,
        cfg.workers,
        1,
        |path, out| {
            let s = drift_shift_paths(spec, path, y)?;
            out[0] = f64::from(u8::from(s.exploded_by(i)));
            Ok(())
        },
    )?;
    Ok(out[0])
}

/// Compares `E[exp(Y(t) - y)]` with the probability that the drift-shifted
/// integral stays below `2/y` up to `t`.
pub fn martingale_condition_report(
    spec: &ProcessSpec,
    y: f64,
    t: f64,
    variant: MartVariant,
    cfg: &McConfig,
) -> Result<IdentityReport, McError> {
    require_positive("y", y)?;
    let grid = cfg.grid()?;
    grid.index_of(t)?;
    grid.coarsen(2)?.index_of(t)?;
    let limit = 2.0 / y;
    let lhs = fine_and_coarse(spec, &grid, cfg.seed, cfg, 1, |path, cache, out| {
        let i = t_index(path, t)?;
        let (_, e) = cache.exponent(path, y)?;
        out[0] = (e.super_exponent()[i] - y).exp();
        Ok(())
    })?;
    let rhs = fine_and_coarse(spec, &grid, cfg.rhs_seed(), cfg, 1, |path, _, out| {
        let i = t_index(path, t)?;
        let s = drift_shift_paths(spec, path, y)?;
        let survived = match variant {
            MartVariant::Shifted => !s.exploded_by(i),
            MartVariant::Original => {
                !s.exploded_by(i) && original_exponent_integral(spec, path, &s)?[i] < limit
            }
        };
        out[0] = f64::from(u8::from(survived));
        Ok(())
    })?;
    Ok(paired(lhs, rhs).remove(0))
}
