use superexp::estimate::{
    cdf_time_integral, conjecture_probe, estimate_many, identity_report, martingale_check,
    supermartingale_curve, GSpec, McConfig, McError,
};
use superexp::{make_grid, parse_process};

fn cfg(n_steps: usize, n_paths: u64, seed: u64) -> McConfig {
    McConfig::new(1.0, n_steps, n_paths, seed)
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let spec = parse_process("cos(w1)", 1).unwrap();
    let base = martingale_check(&spec, 1.0, 1.0, None, &cfg(64, 5000, 3).with_workers(1)).unwrap();
    for workers in [2, 3, 8] {
        let other = martingale_check(
            &spec,
            1.0,
            1.0,
            None,
            &cfg(64, 5000, 3).with_workers(workers),
        )
        .unwrap();
        assert_eq!(base, other);
    }
}

#[test]
fn curve_stays_below_initial_exponential() {
    let spec = parse_process("1+t", 1).unwrap();
    let curve = supermartingale_curve(&spec, 0.5, &[0.25, 0.5, 1.0], &cfg(128, 20_000, 5)).unwrap();
    let bound = 0.5f64.exp();
    for p in &curve {
        assert!(
            p.estimate.mean <= bound + 3.0 * p.estimate.std_error,
            "{p:?}"
        );
    }
    assert!(curve[0].estimate.mean > curve[2].estimate.mean);
}

#[test]
fn cdf_is_a_distribution_function() {
    let spec = parse_process("2", 1).unwrap();
    let a = [0.1, 0.5, 1.0, 4.0, 50.0];
    let curve = cdf_time_integral(&spec, 1.0, &a, &cfg(128, 10_000, 9)).unwrap();
    let f: Vec<f64> = curve.points.iter().map(|p| p.cdf.mean).collect();
    assert!(f.windows(2).all(|w| w[0] <= w[1]));
    assert!(f.iter().all(|&v| (0.0..=1.0).contains(&v)));
    for p in &curve.points {
        let want = p.cdf.mean * (2.0 / p.a).exp();
        assert!((p.factor.mean - want).abs() <= 1e-12 * want);
    }
}

#[test]
fn identity_holds_for_time_dependent_process() {
    let spec = parse_process("1+t", 1).unwrap();
    let reports = identity_report(
        &spec,
        &[GSpec::One, GSpec::Indicator(1.0)],
        1.0,
        0.5,
        &cfg(256, 40_000, 42),
    )
    .unwrap();
    for r in reports {
        assert!(r.pass, "{r:?}");
    }
}

#[test]
fn identity_requires_deterministic_process() {
    let spec = parse_process("cos(w1)", 1).unwrap();
    let err = identity_report(&spec, &[GSpec::One], 1.0, 1.0, &cfg(16, 1000, 1)).unwrap_err();
    assert!(matches!(err, McError::Precondition(_)), "{err}");
}

#[test]
fn negative_test_function_is_rejected() {
    let spec = parse_process("1", 1).unwrap();
    let g: GSpec = "u - 10".parse().unwrap();
    assert!(identity_report(&spec, &[g], 1.0, 1.0, &cfg(16, 1000, 1)).is_err());
}

#[test]
fn stopped_martingale_is_exact_in_mean() {
    let spec = parse_process("2", 1).unwrap();
    let r = martingale_check(&spec, 0.5, 1.0, Some(1.5), &cfg(256, 40_000, 12)).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn estimate_many_reduces_in_path_order() {
    let grid = make_grid(1.0, 8).unwrap();
    let one = estimate_many(&grid, 1, 4, 2500, 1, 1, |p, out| {
        out[0] = p.value(8)[0];
        Ok(())
    })
    .unwrap();
    let many = estimate_many(&grid, 1, 4, 2500, 4, 1, |p, out| {
        out[0] = p.value(8)[0];
        Ok(())
    })
    .unwrap();
    assert_eq!(one, many);
    assert!(one[0].mean.abs() < 4.0 * one[0].std_error);
}

#[test]
fn probe_checkpoints_are_prefixes() {
    let spec = parse_process("1", 1).unwrap();
    let rows = conjecture_probe(&spec, 1.0, &[1000, 3000], &cfg(64, 3000, 2)).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].n_paths, 1000);
    assert_eq!(rows[1].n_paths, 3000);
    assert!(conjecture_probe(&spec, 1.0, &[1500, 3000], &cfg(64, 3000, 2)).is_err());
}
