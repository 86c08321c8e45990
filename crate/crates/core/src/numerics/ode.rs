//! Scalar Dormand–Prince 5(4) integrator with step-size control.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Dp5Options {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Upper bound on |h|; keeps the node spacing fine enough for interpolation.
    pub h_max: f64,
    pub h_init: Option<f64>,
}

/// An accepted node `(t, y, y')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub t: f64,
    pub y: f64,
    pub dy: f64,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate `y' = f(t, y)` from `t0` towards `t_end`, stopping early at the first
/// accepted node where `stop(t, y)` holds. Returns every accepted node, including
/// the initial one.
pub fn integrate<F, S>(f: F, t0: f64, y0: f64, t_end: f64, opts: &Dp5Options, mut stop: S) -> Result<Vec<Node>>
where
    F: Fn(f64, f64) -> f64,
    S: FnMut(f64, f64) -> bool,
{
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let span = (t_end - t0).abs();
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, y);
    let mut nodes = vec![Node { t, y, dy: k1 }];
    if span == 0.0 {
        return Ok(nodes);
    }

    let mut h = opts.h_init.unwrap_or_else(|| {
        let scale = opts.abs_tol + opts.rel_tol * y.abs();
        let guess = if k1 != 0.0 { 0.01 * (scale / k1.abs()).powf(0.2) } else { 1e-3 };
        guess.min(span)
    });
    h = h.min(opts.h_max).min(span);

    let mut steps = 0usize;
    loop {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::NonConvergence(format!("exceeded {} steps at t = {t}", opts.max_steps)));
        }
        let remaining = (t_end - t) * dir;
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        let hs = h * dir;

        let k2 = f(t + C2 * hs, y + hs * A21 * k1);
        let k3 = f(t + C3 * hs, y + hs * (A31 * k1 + A32 * k2));
        let k4 = f(t + C4 * hs, y + hs * (A41 * k1 + A42 * k2 + A43 * k3));
        let k5 = f(t + C5 * hs, y + hs * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
        let k6 = f(t + hs, y + hs * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
        let y_new = y + hs * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6);
        let t_new = if last { t_end } else { t + hs };
        let k7 = f(t_new, y_new);

        let err_abs = (hs * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)).abs();
        let scale = opts.abs_tol + opts.rel_tol * y.abs().max(y_new.abs());
        let err = err_abs / scale;

        if !err.is_finite() || !y_new.is_finite() {
            h *= 0.2;
            if h < 1e-14 * span {
                return Err(Error::NonConvergence(format!("step size underflow at t = {t}")));
            }
            continue;
        }

        if err <= 1.0 {
            t = t_new;
            y = y_new;
            k1 = k7;
            nodes.push(Node { t, y, dy: k1 });
            if last || stop(t, y) {
                return Ok(nodes);
            }
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * factor).min(opts.h_max);
        if h < 1e-14 * span {
            return Err(Error::NonConvergence(format!("step size underflow at t = {t}")));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> Dp5Options {
        Dp5Options { rel_tol: 1e-11, abs_tol: 1e-13, max_steps: 100_000, h_max: 1.0, h_init: None }
    }

    #[test]
    fn exponential_decay() {
        let nodes = integrate(|_, y| -y, 0.0, 1.0, 3.0, &opts(), |_, _| false).unwrap();
        let last = nodes.last().unwrap();
        assert_eq!(last.t, 3.0);
        assert!((last.y - (-3.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn backward_direction_and_stop() {
        // y' = 2t, y(1) = 1, integrated down towards t = -1, stopping once y < 0.5.
        let nodes = integrate(|t, _| 2.0 * t, 1.0, 1.0, -1.0, &opts(), |_, y| y < 0.5).unwrap();
        let last = nodes.last().unwrap();
        assert!(last.y < 0.5 && last.t > -1.0);
        assert!((last.y - last.t * last.t).abs() < 1e-11);
    }

    #[test]
    fn step_budget_is_enforced() {
        let o = Dp5Options { max_steps: 3, h_max: 0.01, ..opts() };
        let r = integrate(|_, y| y, 0.0, 1.0, 1.0, &o, |_, _| false);
        assert!(matches!(r, Err(Error::NonConvergence(_))));
    }
}
