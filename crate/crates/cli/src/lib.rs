//! Command-line front end for the `superexp` simulator.
//!
//! Every subcommand writes one CSV table (to `--out`, or standard output)
//! preceded by `#` comment lines that record the version and the canonical
//! command line that reproduces the table. The worker count is left out of
//! that record because it never changes the output.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use superexp::drift::{drift_shift_paths, write_drift_trace};
use superexp::estimate::{
    cdf_time_integral, conjecture_probe, explosion_probability, gk_identity_check, identity_report,
    martingale_check, martingale_condition_report, supermartingale_curve, Estimate, GSpec,
    IdentityReport, MartVariant, McConfig, McError,
};
use superexp::exponent::write_exponent_trace;
use superexp::path::write_paths_csv;
use superexp::{
    euler_super_sde, eval_on_path, exponent_paths, fmt_real, parse_process, sample_driver,
    ProcessSpec,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

const AFTER_HELP: &str = "\
Process expressions: comma-separated components over t, w1..wd, numbers,
+ - * / ^, parentheses and sin cos exp log sqrt abs tanh neg. `^` is
right-associative and binds tighter than unary minus (-2^2 = -4); there is
no implicit multiplication.

G choices: one | identity | indicator(c) | capped(c) | any expression in u.

Exit codes: 0 success, 2 a checked identity failed, 1 usage or runtime error.";

#[derive(Debug, Parser)]
#[command(name = "superexp", version, about = "Monte Carlo checks for Brownian super-exponents", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Sim {
    /// Time horizon T
    #[arg(long = "T", default_value_t = 1.0)]
    horizon: f64,
    /// Number of grid steps
    #[arg(long, default_value_t = 1024)]
    steps: usize,
    /// Number of Monte Carlo paths
    #[arg(long, default_value_t = 100_000)]
    paths: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Worker threads (0 = all cores); never changes results
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Output CSV path (standard output if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct Process {
    /// Generating process, one expression per component
    #[arg(long, default_value = "1")]
    process: String,
    /// Brownian dimension
    #[arg(long, default_value_t = 1)]
    d: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// E[G(Y(t)) exp(Y(t)-y)] against E[G(Z/(1/y-A/2)); A < 2/y] (deterministic X)
    Identity {
        #[command(flatten)]
        process: Process,
        #[arg(long, default_value_t = 1.0)]
        y: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Test function; repeat for several
        #[arg(long = "G", default_value = "one")]
        g: Vec<String>,
        #[command(flatten)]
        sim: Sim,
    },
    /// E[exp(Y(t))] on a list of times (deterministic X)
    Curve {
        #[command(flatten)]
        process: Process,
        #[arg(long, default_value_t = 1.0)]
        y: f64,
        /// Comma-separated grid times
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75,1")]
        times: Vec<f64>,
        #[command(flatten)]
        sim: Sim,
    },
    /// Distribution of A(t) and its exp(-2/a) factorization (deterministic X)
    Cdf {
        #[command(flatten)]
        process: Process,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Comma-separated increasing thresholds
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,4,8")]
        a: Vec<f64>,
        #[command(flatten)]
        sim: Sim,
    },
    /// E[exp(Y(t ∧ τ_N) - y)] against 1
    Martingale {
        #[command(flatten)]
        process: Process,
        #[arg(long, default_value_t = 1.0)]
        y: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Stop when Y first reaches this level
        #[arg(long)]
        barrier: Option<f64>,
        #[command(flatten)]
        sim: Sim,
    },
    /// Explosion probability of the drift-shifted process and the martingale condition
    Driftshift {
        #[command(flatten)]
        process: Process,
        #[arg(long, default_value_t = 1.0)]
        y: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Exponent weighting the shifted integral: shifted | original
        #[arg(long, default_value = "shifted")]
        variant: String,
        #[command(flatten)]
        sim: Sim,
    },
    /// P{∫exp(W-u/2)du <= a} against exp(-2/a) E[exp(2Z(t)/(a+A(t)))]
    Gk {
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Comma-separated thresholds
        #[arg(long, value_delimiter = ',', default_value = "1,2")]
        a: Vec<f64>,
        #[command(flatten)]
        sim: Sim,
    },
    /// Exploratory running estimates of E[2Z(t)/A(t)]
    Probe {
        #[command(flatten)]
        process: Process,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Comma-separated path counts (multiples of 1000)
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "1000,10000,100000,1000000"
        )]
        checkpoints: Vec<u64>,
        #[command(flatten)]
        sim: Sim,
    },
    /// Dump driver paths, optionally with exponent or drift-shift traces
    Paths {
        #[command(flatten)]
        process: Process,
        #[arg(long, default_value_t = 1.0)]
        y: f64,
        /// none | exponent | drift
        #[arg(long, default_value = "none")]
        trace: String,
        #[command(flatten)]
        sim: Sim,
    },
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Mc(McError),
    Io(io::Error),
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        CliError::Mc(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Mc(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

/// Runs one subcommand; `args[0]` is the program name. Returns the exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_ERROR
            } else {
                EXIT_PASS
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(e) => {
            eprintln!("superexp: {e}");
            EXIT_ERROR
        }
    }
}

fn parse_spec(p: &Process) -> Result<ProcessSpec, CliError> {
    parse_process(&p.process, p.d)
        .map_err(|e| CliError::Usage(format!("--process \"{}\": {e}", p.process)))
}

fn config(sim: &Sim) -> McConfig {
    McConfig::new(sim.horizon, sim.steps, sim.paths, sim.seed).with_workers(sim.workers)
}

fn usage_guard(spec: &ProcessSpec, subcommand: &str) -> Result<(), CliError> {
    if spec.is_deterministic() {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "{subcommand} requires a deterministic process; `{}` depends on w",
            spec.source()
        )))
    }
}

fn check_t(t: f64, sim: &Sim) -> Result<(), CliError> {
    if t > sim.horizon || t < 0.0 {
        return Err(CliError::Usage(format!(
            "--t {t} must lie in [0, T = {}]",
            sim.horizon
        )));
    }
    Ok(())
}

fn quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', "'\\''"))
}

fn list<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Canonical command line and key settings, written as CSV comments.
struct Header {
    command: String,
    y: Option<f64>,
    process: Option<String>,
}

impl Header {
    fn new(sub: &str, process: Option<&Process>) -> Self {
        let mut command = format!("superexp {sub}");
        if let Some(p) = process {
            let _ = write!(command, " --process {} --d {}", quote(&p.process), p.d);
        }
        Header {
            command,
            y: None,
            process: process.map(|p| p.process.clone()),
        }
    }

    fn arg(mut self, flag: &str, value: impl std::fmt::Display) -> Self {
        let _ = write!(self.command, " --{flag} {value}");
        self
    }

    fn y(mut self, y: f64) -> Self {
        self.y = Some(y);
        self.arg("y", y)
    }

    fn sim(self, sim: &Sim) -> Self {
        self.arg("T", sim.horizon)
            .arg("steps", sim.steps)
            .arg("paths", sim.paths)
            .arg("seed", sim.seed)
    }

    fn write(&self, out: &mut dyn Write, sim: &Sim) -> io::Result<()> {
        write!(
            out,
            "# superexp {VERSION} seed={} n_paths={} n_steps={} T={}",
            sim.seed, sim.paths, sim.steps, sim.horizon
        )?;
        if let Some(y) = self.y {
            write!(out, " y={y}")?;
        }
        if let Some(p) = &self.process {
            write!(out, " process=\"{p}\"")?;
        }
        writeln!(out)?;
        writeln!(out, "# command: {}", self.command)
    }
}

fn open_out(sim: &Sim) -> Result<Box<dyn Write>, CliError> {
    Ok(match &sim.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn est_cols(e: &Estimate) -> String {
    format!("{},{}", fmt_real(e.mean), fmt_real(e.std_error))
}

fn report_row(r: &IdentityReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        est_cols(&r.lhs),
        est_cols(&r.rhs),
        fmt_real(r.z),
        fmt_real(r.allowance),
        r.lhs.n_paths,
        r.lhs.n_excluded,
        r.rhs.n_excluded,
        r.pass
    )
}

const REPORT_COLS: &str =
    "lhs_mean,lhs_se,rhs_mean,rhs_se,z,allowance,n_paths,lhs_excluded,rhs_excluded,pass";

fn dispatch(command: Command) -> Result<bool, CliError> {
    match command {
        Command::Identity {
            process,
            y,
            t,
            g,
            sim,
        } => {
            let spec = parse_spec(&process)?;
            usage_guard(&spec, "identity")?;
            check_t(t, &sim)?;
            let gs = g
                .iter()
                .map(|s| s.parse::<GSpec>())
                .collect::<Result<Vec<_>, _>>()?;
            let reports = identity_report(&spec, &gs, y, t, &config(&sim))?;
            let mut header = Header::new("identity", Some(&process)).y(y).arg("t", t);
            for g in &gs {
                header = header.arg("G", quote(&g.to_string()));
            }
            let mut out = open_out(&sim)?;
            header.sim(&sim).write(&mut out, &sim)?;
            writeln!(out, "G,y,t,{REPORT_COLS}")?;
            for (g, r) in gs.iter().zip(&reports) {
                writeln!(
                    out,
                    "{},{},{},{}",
                    g,
                    fmt_real(y),
                    fmt_real(t),
                    report_row(r)
                )?;
                eprintln!(
                    "identity G={g}: lhs {:.6} rhs {:.6} z {:.3} -> {}",
                    r.lhs.mean,
                    r.rhs.mean,
                    r.z,
                    verdict(r.pass)
                );
            }
            out.flush()?;
            Ok(reports.iter().all(|r| r.pass))
        }
        Command::Curve {
            process,
            y,
            times,
            sim,
        } => {
            let spec = parse_spec(&process)?;
            usage_guard(&spec, "curve")?;
            for &t in &times {
                check_t(t, &sim)?;
            }
            let curve = supermartingale_curve(&spec, y, &times, &config(&sim))?;
            let mut out = open_out(&sim)?;
            Header::new("curve", Some(&process))
                .y(y)
                .arg("times", list(&times))
                .sim(&sim)
                .write(&mut out, &sim)?;
            writeln!(
                out,
                "t,mean,std_error,ci95_low,ci95_high,n_paths,n_excluded"
            )?;
            for p in &curve {
                let (lo, hi) = p.estimate.ci95();
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    fmt_real(p.t),
                    est_cols(&p.estimate),
                    fmt_real(lo),
                    fmt_real(hi),
                    p.estimate.n_paths,
                    p.estimate.n_excluded
                )?;
            }
            out.flush()?;
            Ok(true)
        }
        Command::Cdf { process, t, a, sim } => {
            let spec = parse_spec(&process)?;
            usage_guard(&spec, "cdf")?;
            check_t(t, &sim)?;
            let curve = cdf_time_integral(&spec, t, &a, &config(&sim))?;
            let mut out = open_out(&sim)?;
            Header::new("cdf", Some(&process))
                .arg("t", t)
                .arg("a", list(&a))
                .sim(&sim)
                .write(&mut out, &sim)?;
            writeln!(out, "a,F,F_se,D,D_se,remark,remark_se,n_paths,n_excluded")?;
            for p in &curve.points {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    fmt_real(p.a),
                    est_cols(&p.cdf),
                    est_cols(&p.factor),
                    est_cols(&p.remark),
                    p.cdf.n_paths,
                    p.cdf.n_excluded
                )?;
            }
            out.flush()?;
            Ok(true)
        }
        Command::Martingale {
            process,
            y,
            t,
            barrier,
            sim,
        } => {
            let spec = parse_spec(&process)?;
            check_t(t, &sim)?;
            let report = martingale_check(&spec, y, t, barrier, &config(&sim))?;
            let mut header = Header::new("martingale", Some(&process)).y(y).arg("t", t);
            if let Some(n) = barrier {
                header = header.arg("barrier", n);
            }
            let mut out = open_out(&sim)?;
            header.sim(&sim).write(&mut out, &sim)?;
            writeln!(
                out,
                "t,barrier,mean,std_error,z,allowance,n_paths,n_excluded,pass"
            )?;
            let e = &report.estimate;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                fmt_real(t),
                barrier.map_or_else(|| "inf".to_string(), fmt_real),
                est_cols(e),
                fmt_real(report.z()),
                fmt_real(report.allowance),
                e.n_paths,
                e.n_excluded,
                report.pass
            )?;
            out.flush()?;
            eprintln!(
                "martingale: mean {:.6} se {:.6} -> {}",
                e.mean,
                e.std_error,
                verdict(report.pass)
            );
            Ok(report.pass)
        }
        Command::Driftshift {
            process,
            y,
            t,
            variant,
            sim,
        } => {
            let spec = parse_spec(&process)?;
            check_t(t, &sim)?;
            let variant: MartVariant = variant.parse()?;
            let cfg = config(&sim);
            let explosion = explosion_probability(
                &spec,
                y,
                t,
                &McConfig {
                    seed: cfg.rhs_seed(),
                    ..cfg.clone()
                },
            )?;
            let report = martingale_condition_report(&spec, y, t, variant, &cfg)?;
            let mut out = open_out(&sim)?;
            Header::new("driftshift", Some(&process))
                .y(y)
                .arg("t", t)
                .arg("variant", variant)
                .sim(&sim)
                .write(&mut out, &sim)?;
            writeln!(out, "y,t,variant,{REPORT_COLS},explosion_prob,explosion_se")?;
            writeln!(
                out,
                "{},{},{},{},{}",
                fmt_real(y),
                fmt_real(t),
                variant,
                report_row(&report),
                est_cols(&explosion)
            )?;
            out.flush()?;
            eprintln!(
                "driftshift: E[exp(Y-y)] {:.6} P(M<2/y) {:.6} z {:.3} P(explode) {:.6} -> {}",
                report.lhs.mean,
                report.rhs.mean,
                report.z,
                explosion.mean,
                verdict(report.pass)
            );
            Ok(report.pass)
        }
        Command::Gk { t, a, sim } => {
            check_t(t, &sim)?;
            let cfg = config(&sim);
            let reports = a
                .iter()
                .map(|&a| gk_identity_check(t, a, &cfg))
                .collect::<Result<Vec<_>, _>>()?;
            let mut out = open_out(&sim)?;
            Header::new("gk", None)
                .arg("t", t)
                .arg("a", list(&a))
                .sim(&sim)
                .write(&mut out, &sim)?;
            writeln!(out, "a,t,{REPORT_COLS}")?;
            for (a, r) in a.iter().zip(&reports) {
                writeln!(out, "{},{},{}", fmt_real(*a), fmt_real(t), report_row(r))?;
                eprintln!(
                    "gk a={a}: lhs {:.6} rhs {:.6} z {:.3} -> {}",
                    r.lhs.mean,
                    r.rhs.mean,
                    r.z,
                    verdict(r.pass)
                );
            }
            out.flush()?;
            Ok(reports.iter().all(|r| r.pass))
        }
        Command::Probe {
            process,
            t,
            checkpoints,
            sim,
        } => {
            let spec = parse_spec(&process)?;
            usage_guard(&spec, "probe")?;
            check_t(t, &sim)?;
            let rows = conjecture_probe(&spec, t, &checkpoints, &config(&sim))?;
            let mut out = open_out(&sim)?;
            Header::new("probe", Some(&process))
                .arg("t", t)
                .arg("checkpoints", list(&checkpoints))
                .sim(&sim)
                .write(&mut out, &sim)?;
            writeln!(
                out,
                "# exploratory: running estimates of E[2Z(t)/A(t)], no pass/fail"
            )?;
            writeln!(out, "n_paths,mean,std_error,n_excluded")?;
            for r in &rows {
                writeln!(
                    out,
                    "{},{},{}",
                    r.n_paths,
                    est_cols(&r.estimate),
                    r.estimate.n_excluded
                )?;
            }
            out.flush()?;
            Ok(true)
        }
        Command::Paths {
            process,
            y,
            trace,
            sim,
        } => {
            let spec = parse_spec(&process)?;
            let cfg = config(&sim);
            let grid = cfg.grid()?;
            let mut out = open_out(&sim)?;
            Header::new("paths", Some(&process))
                .y(y)
                .arg("trace", &trace)
                .sim(&sim)
                .write(&mut out, &sim)?;
            let paths: Vec<_> = (0..sim.paths)
                .map(|i| sample_driver(&grid, spec.dim(), sim.seed, i))
                .collect();
            match trace.as_str() {
                "none" => write_paths_csv(&mut out, &paths)?,
                "exponent" => {
                    for (k, p) in paths.iter().enumerate() {
                        let x = eval_on_path(&spec, p).map_err(McError::from)?;
                        let e = exponent_paths(&x, p, y).map_err(McError::from)?;
                        let eu = euler_super_sde(&x, p, y).map_err(McError::from)?;
                        write_exponent_trace(&mut out, p, &e, &eu, k == 0)?;
                    }
                }
                "drift" => {
                    for (k, p) in paths.iter().enumerate() {
                        let s = drift_shift_paths(&spec, p, y).map_err(McError::from)?;
                        write_drift_trace(&mut out, p, &s, k == 0)?;
                    }
                }
                other => {
                    return Err(CliError::Usage(format!(
                        "--trace must be none, exponent or drift, got `{other}`"
                    )))
                }
            }
            out.flush()?;
            Ok(true)
        }
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}
