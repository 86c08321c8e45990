use approx::assert_relative_eq;
use proptest::prelude::*;
use tugwedge::profile::*;
use tugwedge::wedge_ode::{critical_half_angle_closed, solve_g, theta_a, OdeConfig};
use tugwedge::Error;

/// `(f, f')` at `theta` from RK4 on `f'' = Φ(f, f')` with `f(0) = a`, `f'(0) = 0`.
fn angular_ode(a: f64, p: f64, theta: f64, steps: usize) -> (f64, f64) {
    let accel = |y: f64, yp: f64| {
        let num = 4.0 * y * y * (1.0 + 2.0 * y) + yp * yp * (1.0 + 2.0 * (3.0 * p - 4.0) * y / p);
        -p * num / (4.0 * y * y + (p - 1.0) * yp * yp)
    };
    let h = theta / steps as f64;
    let (mut y, mut v) = (a, 0.0);
    for _ in 0..steps {
        let (k1y, k1v) = (v, accel(y, v));
        let (k2y, k2v) = (v + 0.5 * h * k1v, accel(y + 0.5 * h * k1y, v + 0.5 * h * k1v));
        let (k3y, k3v) = (v + 0.5 * h * k2v, accel(y + 0.5 * h * k2y, v + 0.5 * h * k2v));
        let (k4y, k4v) = (v + h * k3v, accel(y + h * k3y, v + h * k3v));
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    (y, v)
}

#[test]
fn h_at_the_top() {
    let cfg = OdeConfig::default();
    for (a, p) in [(1.0, 2.0), (0.4, 3.0), (7.0, 1.5)] {
        let g = solve_g(a, p, &cfg).unwrap();
        let (h, dh) = eval_h(a, a, p, &g).unwrap();
        assert_eq!(h, 0.0);
        assert_relative_eq!(dh, -2.0 * p * (1.0 + 2.0 * a), max_relative = 1e-14);
        assert_relative_eq!(0.5 * dh, -p * (1.0 + 2.0 * a), max_relative = 1e-14);
        let (h0, _) = eval_h(a, 0.0, p, &g).unwrap();
        assert!(h0 > 0.0);
        assert!(eval_h(a, 1.01 * a, p, &g).is_err());
        assert!(eval_h(a, -1e-3, p, &g).is_err());
    }
}

#[test]
fn h_derivative_matches_difference_quotient() {
    let cfg = OdeConfig::default();
    let (a, p) = (1.3, 2.7);
    let g = solve_g(a, p, &cfg).unwrap();
    for y in [0.1, 0.5, 1.0] {
        let d = 1e-5;
        let (hp, _) = eval_h(a, y + d, p, &g).unwrap();
        let (hm, _) = eval_h(a, y - d, p, &g).unwrap();
        let (_, dh) = eval_h(a, y, p, &g).unwrap();
        assert_relative_eq!(dh, (hp - hm) / (2.0 * d), max_relative = 1e-6);
    }
}

#[test]
fn calibration_examples() {
    assert!(calibrate_a(1e-3, 2.0, 1e-12).unwrap() < calibrate_a(0.3, 2.0, 1e-12).unwrap());
    assert!(matches!(calibrate_a(std::f64::consts::FRAC_PI_4, 2.0, 1e-10), Err(Error::OutOfRange { .. })));
    let a = calibrate_a(0.5, 2.0, 1e-10).unwrap();
    let fine = OdeConfig { rel_tol: 1e-11, abs_tol: 1e-13, ..OdeConfig::default() };
    assert!((theta_a(a, 2.0, &fine).unwrap() - 0.5).abs() < 1e-8);
    // p = 2 inverse of θ_a = ½ arccos(1/(1 + 2a)).
    assert_relative_eq!(a, 0.5 * (1.0 / 1f64.cos() - 1.0), max_relative = 1e-8);
}

#[test]
fn calibration_round_trip() {
    let cfg = OdeConfig::default();
    let tol = 1e-10;
    for p in [1.5, 2.0, 3.0] {
        let crit = critical_half_angle_closed(p);
        for frac in [0.1, 0.3, 0.5] {
            let target = frac * crit;
            let a = calibrate_a(target, p, tol).unwrap();
            assert!((theta_a(a, p, &cfg).unwrap() - target).abs() <= 2.0 * tol);
        }
    }
}

#[test]
fn profile_invariants() {
    let cfg = OdeConfig::default();
    for (a, p) in [(1.0, 2.0), (0.3, 3.0), (4.0, 1.5), (20.0, 5.0)] {
        let prof = build_profile(a, p, 257).unwrap();
        let grid = prof.grid();
        let first = grid[0];
        assert_eq!((first.theta, first.y, first.yp), (0.0, a, 0.0));
        assert_relative_eq!(first.ypp, -p * (1.0 + 2.0 * a), max_relative = 1e-12);
        let last = grid.last().unwrap();
        assert_eq!(last.y, 0.0);
        assert!(grid.windows(2).all(|w| w[1].y < w[0].y && w[1].theta > w[0].theta));
        assert!(grid[..grid.len() - 1].iter().all(|n| n.y > 0.0));
        assert!((prof.theta_a_integrated() - theta_a(a, p, &cfg).unwrap()).abs() < 1e-6);
        // Square consistency y'² = H(y).
        let g = solve_g(a, p, &cfg).unwrap();
        for n in grid {
            let (h, _) = eval_h(a, n.y, p, &g).unwrap();
            assert!((n.yp * n.yp - h).abs() <= 1e-9 * (1.0 + h));
            assert!(profile_residual(n.y, n.yp, n.ypp, p).abs() < 1e-6 * (1.0 + a).powi(3));
        }
    }
}

#[test]
fn profile_matches_angular_ode() {
    for (a, p) in [(1.0, 3.0), (0.5, 1.5)] {
        let prof = build_profile(a, p, 257).unwrap();
        for frac in [0.2, 0.5, 0.9] {
            let theta = frac * prof.theta_a();
            let (y, yp) = angular_ode(a, p, theta, 20_000);
            let [f, d1, _, _] = prof.eval(theta);
            assert!((f - y).abs() < 1e-9 * (1.0 + a), "p={p} θ={theta}: {f} vs {y}");
            assert!((d1 - yp).abs() < 1e-8 * (1.0 + a));
        }
    }
}

#[test]
fn even_extension() {
    let prof = build_profile(0.8, 2.5, 65).unwrap();
    assert!(prof.is_even());
    for theta in [0.01, 0.2, 0.9 * prof.theta_a()] {
        let [f, d1, d2, d3] = prof.eval(theta);
        let [g, e1, e2, e3] = prof.eval(-theta);
        assert_eq!((f, d2), (g, e2));
        assert_eq!((d1, d3), (-e1, -e3));
    }
    assert_eq!(prof.eval(prof.theta_a())[0], 0.0);
}

#[test]
fn residual_examples() {
    for (a, p) in [(1.0, 2.0), (0.2, 4.0)] {
        assert_eq!(profile_residual(a, 0.0, -p * (1.0 + 2.0 * a), p), 0.0);
    }
    assert_eq!(profile_residual(0.0, 0.0, 17.0, 3.0), 0.0);
}

#[test]
fn dense_grids_stay_accurate() {
    for (p, half) in [(2.0, 0.78), (3.0, 0.2), (1.1, 1.2)] {
        let a = calibrate_a(half, p, 1e-10).unwrap();
        let prof = build_profile(a, p, 1025).unwrap();
        let r = prof.max_residual(4);
        assert!(r < 1e-6 * (1.0 + a).powi(3), "p={p} a={a}: {r}");
    }
}

#[test]
fn rejects_bad_inputs() {
    assert!(build_profile(1.0, 2.0, 8).is_err());
    assert!(build_profile(-1.0, 2.0, 64).is_err());
    assert!(build_profile(1.0, 0.9, 64).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn interior_residual_is_small(a in 0.05f64..10.0, p in 1.2f64..6.0) {
        let prof = build_profile(a, p, 129).unwrap();
        prop_assert!(prof.max_residual(3) < 1e-6 * (1.0 + a).powi(3));
    }
}
