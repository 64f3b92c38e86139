//! Acceptance suite. Each criterion prints one `PASS`/`FAIL` line; the
//! process exits nonzero if any criterion fails.
//!
//! Run with `cargo test -p superexp-cli --test acceptance`.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use superexp::drift::drift_shift_paths;
use superexp::estimate::{
    cdf_time_integral, combined_se, explosion_probability, gk_identity_check, identity_report,
    martingale_check, martingale_condition_report, supermartingale_curve, GSpec, MartVariant,
    McConfig,
};
use superexp::expr::{eval_process, ParseError};
use superexp::{
    euler_super_sde, eval_on_path, exponent_paths, make_grid, parse_process, sample_driver,
    transformed_exponential, DriverPath, ProcessSpec,
};

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome);

const BUILT_IN: [&str; 7] = ["0", "1", "2", "0.5", "1+t", "cos(t)", "cos(w1)"];

fn spec(src: &str) -> ProcessSpec {
    parse_process(src, 1).expect("built-in spec parses")
}

fn cfg(n_steps: usize, n_paths: u64, seed: u64) -> McConfig {
    McConfig::new(1.0, n_steps, n_paths, seed)
}

fn ac1_zero_process() -> Outcome {
    let zero = spec("0");
    let grid = make_grid(1.0, 1024).map_err(|e| e.to_string())?;
    for idx in 0..100 {
        let p = sample_driver(&grid, 1, 42, idx);
        let x = eval_on_path(&zero, &p).map_err(|e| e.to_string())?;
        for y in [0.5, 1.0, 3.0] {
            let e = exponent_paths(&x, &p, y).map_err(|e| e.to_string())?;
            let exact = e.super_exponent().iter().all(|&v| v == y)
                && e.log_z().iter().all(|&v| v == 0.0)
                && e.time_integral().iter().all(|&v| v == 0.0)
                && e.super_exponent().iter().all(|&v| (v - y).exp() == 1.0);
            if !exact {
                return Ok((false, format!("path {idx}, y={y}: core not exact")));
            }
        }
    }
    let r = martingale_check(&zero, 1.0, 1.0, None, &cfg(256, 10_000, 42))
        .map_err(|e| e.to_string())?;
    let ok = r.estimate.mean == 1.0 && r.estimate.std_error == 0.0;
    Ok((
        ok,
        format!("MC mean {} se {}", r.estimate.mean, r.estimate.std_error),
    ))
}

fn ac2_initial_value() -> Outcome {
    let grid = make_grid(1.0, 256).map_err(|e| e.to_string())?;
    for src in BUILT_IN {
        let s = spec(src);
        for idx in 0..100 {
            let p = sample_driver(&grid, 1, 2024, idx);
            let x = eval_on_path(&s, &p).map_err(|e| e.to_string())?;
            for y in [0.25, 1.0, 2.0] {
                let e = exponent_paths(&x, &p, y).map_err(|e| e.to_string())?;
                let eu = euler_super_sde(&x, &p, y).map_err(|e| e.to_string())?;
                if e.super_exponent()[0] != y || eu[0] != y {
                    return Ok((false, format!("spec {src}, path {idx}, y={y}")));
                }
            }
        }
    }
    Ok((
        true,
        format!("{} specs x 100 paths x 3 values of y", BUILT_IN.len()),
    ))
}

fn ac3_time_distribution() -> Outcome {
    let gs = [GSpec::One, GSpec::Capped(10.0)];
    let reports = identity_report(&spec("1"), &gs, 1.0, 1.0, &cfg(1024, 200_000, 42))
        .map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    for (g, r) in gs.iter().zip(&reports) {
        detail.push(format!(
            "G={g}: {:.5}±{:.5} vs {:.5}±{:.5} z={:.2} allow={:.1e}",
            r.lhs.mean, r.lhs.std_error, r.rhs.mean, r.rhs.std_error, r.z, r.allowance
        ));
    }
    Ok((reports.iter().all(|r| r.pass), detail.join("; ")))
}

fn ac4_integral_duality() -> Outcome {
    let one = spec("1");
    let cdf =
        cdf_time_integral(&one, 1.0, &[2.0], &cfg(1024, 100_000, 42)).map_err(|e| e.to_string())?;
    let curve = supermartingale_curve(&one, 1.0, &[1.0], &cfg(1024, 100_000, 43))
        .map_err(|e| e.to_string())?;
    let dual = cdf.points[0].cdf.scaled(1f64.exp());
    let lhs = curve[0].estimate;
    let se = combined_se(&lhs, &dual);
    let z = (lhs.mean - dual.mean) / se;
    Ok((
        z.abs() <= 3.0,
        format!(
            "E[exp(Y(1))] {:.5}±{:.5} vs e*F(2) {:.5}±{:.5} z={z:.2}",
            lhs.mean, lhs.std_error, dual.mean, dual.std_error
        ),
    ))
}

fn ac5_strict_supermartingale() -> Outcome {
    let times = [0.25, 0.5, 0.75, 1.0];
    let curve = supermartingale_curve(&spec("2"), 1.0, &times, &cfg(1024, 200_000, 42))
        .map_err(|e| e.to_string())?;
    let first = curve[0].estimate;
    let last = curve[curve.len() - 1].estimate;
    let gap = first.mean - last.mean;
    let se = combined_se(&first, &last);
    let bound = 1f64.exp();
    let bounded = curve
        .iter()
        .all(|p| p.estimate.mean <= bound + 3.0 * p.estimate.std_error);
    let pts: Vec<_> = curve
        .iter()
        .map(|p| format!("{:.4}", p.estimate.mean))
        .collect();
    Ok((
        gap > 3.0 * se && bounded,
        format!(
            "curve [{}], drop {gap:.4} = {:.1} SE, all <= e: {bounded}",
            pts.join(", "),
            gap / se
        ),
    ))
}

fn ac6_example_martingale() -> Outcome {
    let r = martingale_check(&spec("cos(w1)"), 1.0, 1.0, None, &cfg(1024, 100_000, 7))
        .map_err(|e| e.to_string())?;
    Ok((
        r.pass,
        format!(
            "mean {:.5}±{:.5} z={:.2} allow={:.1e}",
            r.estimate.mean,
            r.estimate.std_error,
            r.z(),
            r.allowance
        ),
    ))
}

/// Mean over paths of `max_i |a_i - b_i|` at 512 and 1024 steps, on common
/// Brownian paths (the coarse path is the fine one with pairs of increments
/// summed).
fn error_ratio<F>(src: &str, n_paths: u64, err: F) -> Result<(f64, f64), String>
where
    F: Fn(&ProcessSpec, &DriverPath) -> Result<f64, String>,
{
    let s = spec(src);
    let grid = make_grid(1.0, 1024).map_err(|e| e.to_string())?;
    let (mut coarse, mut fine) = (0.0, 0.0);
    for idx in 0..n_paths {
        let p = sample_driver(&grid, 1, 42, idx);
        fine += err(&s, &p)?;
        coarse += err(&s, &p.coarsen(2).map_err(|e| e.to_string())?)?;
    }
    Ok((coarse / n_paths as f64, fine / n_paths as f64))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn ac7_euler_consistency() -> Outcome {
    let (c, f) = error_ratio("1", 200, |s, p| {
        let x = eval_on_path(s, p).map_err(|e| e.to_string())?;
        let e = exponent_paths(&x, p, 1.0).map_err(|e| e.to_string())?;
        let eu = euler_super_sde(&x, p, 1.0).map_err(|e| e.to_string())?;
        Ok(max_abs_diff(e.super_exponent(), &eu))
    })?;
    let ratio = c / f;
    Ok((
        (1.5..=3.0).contains(&ratio),
        format!(
            "max error 512 steps {c:.3e}, 1024 steps {f:.3e}, ratio {ratio:.3} (window [1.5, 3])"
        ),
    ))
}

fn ac8_transformed_exponential() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for src in ["1", "cos(w1)"] {
        let (c, f) = error_ratio(src, 200, |s, p| {
            let x = eval_on_path(s, p).map_err(|e| e.to_string())?;
            let e = exponent_paths(&x, p, 1.0).map_err(|e| e.to_string())?;
            let zt = transformed_exponential(&x, &e, p).map_err(|e| e.to_string())?;
            let target: Vec<f64> = e.super_exponent().iter().map(|v| (v - 1.0).exp()).collect();
            Ok(max_abs_diff(&zt, &target))
        })?;
        let ratio = c / f;
        ok &= (1.5..=3.0).contains(&ratio);
        detail.push(format!("{src}: {c:.3e} -> {f:.3e} ratio {ratio:.3}"));
    }
    Ok((ok, format!("{} (window [1.5, 3])", detail.join("; "))))
}

fn ac9_remark_factorization() -> Outcome {
    let a = [0.5, 1.0, 2.0, 4.0, 8.0];
    let curve = cdf_time_integral(&spec("1"), 1.0, &a, &cfg(1024, 100_000, 42))
        .map_err(|e| e.to_string())?;
    let d: Vec<_> = curve.points.iter().map(|p| p.factor).collect();
    let ok = d
        .windows(2)
        .all(|w| w[1].mean <= w[0].mean + 2.0 * combined_se(&w[0], &w[1]));
    let vals: Vec<_> = d
        .iter()
        .map(|e| format!("{:.4}±{:.4}", e.mean, e.std_error))
        .collect();
    Ok((ok, format!("D = [{}]", vals.join(", "))))
}

fn ac10_drift_shift() -> Outcome {
    let grid = make_grid(1.0, 512).map_err(|e| e.to_string())?;
    for src in ["0", "1", "2", "0.5", "1+t", "cos(t)"] {
        let s = spec(src);
        for idx in 0..100 {
            let p = sample_driver(&grid, 1, 11, idx);
            let x = eval_on_path(&s, &p).map_err(|e| e.to_string())?;
            let e = exponent_paths(&x, &p, 1.0).map_err(|e| e.to_string())?;
            let sh = drift_shift_paths(&s, &p, 1.0).map_err(|e| e.to_string())?;
            for i in 0..sh.n_points() {
                if sh.x_prime(i)[0].to_bits() != x.row(i)[0].to_bits()
                    || sh.integral()[i].to_bits() != e.time_integral()[i].to_bits()
                {
                    return Ok((
                        false,
                        format!("spec {src}, path {idx}, step {i}: reduction not bitwise"),
                    ));
                }
            }
        }
    }
    let cos = spec("cos(w1)");
    let c = cfg(1024, 100_000, 42);
    let r = martingale_condition_report(&cos, 1.0, 1.0, MartVariant::Shifted, &c)
        .map_err(|e| e.to_string())?;
    let p = explosion_probability(
        &cos,
        1.0,
        1.0,
        &McConfig {
            seed: c.rhs_seed(),
            ..c.clone()
        },
    )
    .map_err(|e| e.to_string())?;
    Ok((
        r.z.abs() <= 3.0 && p.mean <= 0.01,
        format!(
            "bitwise reduction ok; E[exp(Y'-1)] {:.5}±{:.5} vs P(M<2) {:.5} z={:.2}; P(explode by 1) {:.5}",
            r.lhs.mean, r.lhs.std_error, r.rhs.mean, r.z, p.mean
        ),
    ))
}

fn ac11_gk() -> Outcome {
    let c = cfg(1024, 200_000, 42);
    let mut ok = true;
    let mut detail = Vec::new();
    for a in [1.0, 2.0] {
        let r = gk_identity_check(1.0, a, &c).map_err(|e| e.to_string())?;
        ok &= r.z.abs() <= 3.0;
        detail.push(format!(
            "a={a}: {:.5}±{:.5} vs {:.5}±{:.5} z={:.2}",
            r.lhs.mean, r.lhs.std_error, r.rhs.mean, r.rhs.std_error, r.z
        ));
    }
    Ok((ok, detail.join("; ")))
}

fn ac12_stopped_martingale() -> Outcome {
    let r = martingale_check(&spec("1"), 1.0, 1.0, Some(2.0), &cfg(1024, 100_000, 42))
        .map_err(|e| e.to_string())?;
    Ok((
        r.pass,
        format!(
            "mean {:.5}±{:.5} z={:.2} allow={:.1e}",
            r.estimate.mean,
            r.estimate.std_error,
            r.z(),
            r.allowance
        ),
    ))
}

fn csv_body(path: &Path) -> Result<String, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    Ok(text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n"))
}

fn ac13_reproducibility() -> Outcome {
    let dir = std::env::temp_dir().join(format!("superexp-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let runs: [&[&str]; 2] = [
        &[
            "martingale",
            "--process",
            "cos(w1)",
            "--d",
            "1",
            "--T",
            "1",
            "--steps",
            "1024",
            "--paths",
            "100000",
            "--y",
            "1",
            "--t",
            "1",
            "--seed",
            "7",
        ],
        &[
            "identity",
            "--process",
            "1",
            "--steps",
            "256",
            "--paths",
            "20000",
            "--G",
            "one",
            "--G",
            "capped(10)",
        ],
    ];
    let mut detail = Vec::new();
    let mut ok = true;
    for (k, args) in runs.iter().enumerate() {
        let mut bodies = Vec::new();
        for workers in [1, 2, 8] {
            let out = dir.join(format!("run{k}-w{workers}.csv"));
            let status = Command::new(env!("CARGO_BIN_EXE_superexp"))
                .args(*args)
                .args(["--workers", &workers.to_string(), "--out"])
                .arg(&out)
                .stderr(std::process::Stdio::null())
                .status()
                .map_err(|e| e.to_string())?;
            if status.code() == Some(1) {
                return Err(format!("{} failed with {status}", args[0]));
            }
            bodies.push(csv_body(&out)?);
        }
        let same = bodies.windows(2).all(|w| w[0] == w[1]);
        ok &= same;
        detail.push(format!(
            "{}: {}",
            args[0],
            if same { "identical" } else { "DIFFERENT" }
        ));
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok((ok, format!("workers 1/2/8 -> {}", detail.join(", "))))
}

fn ac14_parser_golden() -> Outcome {
    let value = |src: &str| -> Result<f64, String> {
        let s = parse_process(src, 1).map_err(|e| format!("{src}: {e}"))?;
        Ok(eval_process(&s, 0.0, &[0.0]).map_err(|e| e.to_string())?[0])
    };
    let golden = [
        ("2+3*4", 14.0),
        ("2*3^2", 18.0),
        ("-2^2", -4.0),
        ("2^3^2", 512.0),
        ("2^-1", 0.5),
        ("8/2/2", 2.0),
        ("1-2-3", -4.0),
        ("(2+3)*4", 20.0),
        ("1.5e1", 15.0),
        ("cos(w1)", 1.0),
        ("exp(t)", 1.0),
    ];
    for (src, want) in golden {
        let got = value(src)?;
        if got != want {
            return Ok((false, format!("{src} = {got}, expected {want}")));
        }
    }
    type Check = fn(&ParseError) -> bool;
    let errors: [(&str, usize, Check); 11] = [
        ("cos(", 1, |e| {
            matches!(e, ParseError::Syntax { pos: 4, .. })
        }),
        ("1 + $", 1, |e| {
            matches!(e, ParseError::Lexical { pos: 4, .. })
        }),
        ("foo(1)", 1, |e| {
            matches!(e, ParseError::Lexical { pos: 0, .. })
        }),
        ("(1 + 2", 1, |e| {
            matches!(e, ParseError::Syntax { pos: 6, .. })
        }),
        ("1 + 2)", 1, |e| {
            matches!(e, ParseError::Syntax { pos: 5, .. })
        }),
        ("2 *", 1, |e| matches!(e, ParseError::Syntax { pos: 3, .. })),
        ("2t", 1, |e| matches!(e, ParseError::Syntax { pos: 1, .. })),
        ("w2", 1, |e| {
            matches!(e, ParseError::Dimension { pos: 0, .. })
        }),
        ("w0", 1, |e| {
            matches!(e, ParseError::Dimension { pos: 0, .. })
        }),
        ("1, 2", 1, |e| {
            matches!(e, ParseError::Dimension { pos: 1, .. })
        }),
        ("1", 2, |e| {
            matches!(e, ParseError::Dimension { pos: 1, .. })
        }),
    ];
    for (src, d, check) in errors {
        match parse_process(src, d) {
            Err(e) if check(&e) => {}
            other => return Ok((false, format!("{src:?} (d={d}) gave {other:?}"))),
        }
    }
    Ok((
        true,
        format!("{} values, {} error cases", golden.len(), errors.len()),
    ))
}

fn main() {
    let criteria: [Criterion; 14] = [
        ("AC-1", ac1_zero_process),
        ("AC-2", ac2_initial_value),
        ("AC-3", ac3_time_distribution),
        ("AC-4", ac4_integral_duality),
        ("AC-5", ac5_strict_supermartingale),
        ("AC-6", ac6_example_martingale),
        ("AC-7", ac7_euler_consistency),
        ("AC-8", ac8_transformed_exponential),
        ("AC-9", ac9_remark_factorization),
        ("AC-10", ac10_drift_shift),
        ("AC-11", ac11_gk),
        ("AC-12", ac12_stopped_martingale),
        ("AC-13", ac13_reproducibility),
        ("AC-14", ac14_parser_golden),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| a.starts_with("AC-"))
        .collect();
    let mut failed = Vec::new();
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == name) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{name:<5} {} ({secs:.1}s) {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            failed.push(name);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: {} failed: {}", failed.len(), failed.join(", "));
        std::process::exit(1);
    }
}
