//! The angular factor `f = y(θ)` of `u = r² f(θ)`.
//!
//! With `H_a(y) = y² G_a(y/a)` the profile solves `y' = −√H_a(y)`, `y(0) = a`, and reaches
//! zero at `θ = θ_a`. [`calibrate_a`] picks `a` so that `θ_a` equals a prescribed half-angle.

use crate::error::{Error, Result};
use crate::numerics::hermite::QuinticHermite;
use crate::numerics::ode::{self, Dp5Options, Node};
use crate::numerics::quad::{self, QuadOptions};
use crate::wedge_ode::{self, check_p, GProfile, OdeConfig};

/// Calibration refuses targets closer than this to the critical half-angle.
pub const CRITICAL_MARGIN: f64 = 1e-6;

/// Largest θ at which the series start hands over to the integrator.
const HANDOFF_THETA: f64 = 1e-3;

/// Allowed relative gap between the series slope and `−√H` at the handoff.
const HANDOFF_GAP: f64 = 1e-6;

/// The integrator stops once `y ≤ STOP_FRACTION · a`; the rest is done by quadrature.
const STOP_FRACTION: f64 = 1e-6;

pub const DEFAULT_NODES: usize = 257;

/// Grid nodes are a blend of Chebyshev and uniform spacing with this Chebyshev weight.
/// Pure Chebyshev spacing shrinks like `n⁻²` at the ends, and rounding in `θ` near `θ_a`
/// then dominates the interpolated `f''` once `n` reaches a few hundred.
const CHEBYSHEV_WEIGHT: f64 = 0.5;

fn same_family(a: f64, p: f64, g: &GProfile) -> Result<()> {
    if g.a() != a || g.p() != p {
        return Err(Error::Domain(format!("G profile was solved for (a, p) = ({}, {}), not ({a}, {p})", g.a(), g.p())));
    }
    Ok(())
}

/// `H'` from `H` via `H' = −[8py²(1+2y) + (2p + 4(3p−4)y)H] / (4y² + (p−1)H)`.
pub fn h_prime(y: f64, h: f64, p: f64) -> f64 {
    -(8.0 * p * y * y * (1.0 + 2.0 * y) + (2.0 * p + 4.0 * (3.0 * p - 4.0) * y) * h) / (4.0 * y * y + (p - 1.0) * h)
}

/// `H''` obtained by differentiating the equation for `H'`.
pub fn h_second(y: f64, h: f64, p: f64) -> f64 {
    let h1 = h_prime(y, h, p);
    let n = 8.0 * p * y * y * (1.0 + 2.0 * y) + (2.0 * p + 4.0 * (3.0 * p - 4.0) * y) * h;
    let d = 4.0 * y * y + (p - 1.0) * h;
    let dn = 8.0 * p * (2.0 * y + 6.0 * y * y) + 4.0 * (3.0 * p - 4.0) * h + (2.0 * p + 4.0 * (3.0 * p - 4.0) * y) * h1;
    let dd = 8.0 * y + (p - 1.0) * h1;
    -(dn * d - n * dd) / (d * d)
}

fn h_value(a: f64, y: f64, g: &GProfile) -> f64 {
    a * a * g.q_at(-((y - a) / a).ln_1p())
}

/// `(H_a(y), H_a'(y))` for `0 ≤ y ≤ a`.
pub fn eval_h(a: f64, y: f64, p: f64, g: &GProfile) -> Result<(f64, f64)> {
    same_family(a, p, g)?;
    if !(0.0..=a).contains(&y) {
        return Err(Error::Domain(format!("y = {y} lies outside [0, {a}]")));
    }
    let h = h_value(a, y, g);
    Ok((h, h_prime(y, h, p)))
}

/// `H_a` on `(−∞, a]`, continued linearly below zero so that integrator stages
/// overshooting the endpoint stay well defined.
fn h_extended(a: f64, y: f64, g: &GProfile) -> f64 {
    if y >= a {
        0.0
    } else if y >= 0.0 {
        h_value(a, y, g)
    } else {
        let h0 = h_value(a, 0.0, g);
        h0 + h_prime(0.0, h0, g.p()) * y
    }
}

/// Left-hand side of `4y²[1 + 2y + y''/p] + y'²[1 + 2(3p−4)y/p + (p−1)y''/p] = 0`.
pub fn profile_residual(y: f64, yp: f64, ypp: f64, p: f64) -> f64 {
    4.0 * y * y * (1.0 + 2.0 * y + ypp / p) + yp * yp * (1.0 + 2.0 * (3.0 * p - 4.0) * y / p + (p - 1.0) * ypp / p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileNode {
    pub theta: f64,
    pub y: f64,
    pub yp: f64,
    pub ypp: f64,
}

/// `f = y(θ)` on `[−θ_a, θ_a]`, stored on `[0, θ_a]` and extended evenly.
#[derive(Debug, Clone)]
pub struct AngularProfile {
    a: f64,
    p: f64,
    theta_a: f64,
    theta_a_integrated: f64,
    grid: Vec<ProfileNode>,
    interp: QuinticHermite,
}

impl AngularProfile {
    /// Rebuild a profile from stored grid nodes, e.g. one read back from disk.
    pub fn from_grid(a: f64, p: f64, grid: Vec<ProfileNode>) -> Result<Self> {
        check_p(p)?;
        if grid.len() < 2 {
            return Err(Error::Domain("profile grid needs at least two nodes".into()));
        }
        if grid[0].theta != 0.0 || grid.windows(2).any(|w| !(w[1].theta > w[0].theta)) {
            return Err(Error::Domain("grid must start at 0 and increase strictly".into()));
        }
        let theta_a = grid.last().map(|n| n.theta).unwrap_or_default();
        Ok(Self::assemble(a, p, theta_a, theta_a, grid))
    }

    fn assemble(a: f64, p: f64, theta_a: f64, theta_a_integrated: f64, grid: Vec<ProfileNode>) -> Self {
        let interp = QuinticHermite::new(
            grid.iter().map(|n| n.theta).collect(),
            grid.iter().map(|n| n.y).collect(),
            grid.iter().map(|n| n.yp).collect(),
            grid.iter().map(|n| n.ypp).collect(),
        );
        Self { a, p, theta_a, theta_a_integrated, grid, interp }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn theta_a(&self) -> f64 {
        self.theta_a
    }

    /// Aperture obtained by integrating `y' = −√H` rather than by quadrature of `θ_a`.
    pub fn theta_a_integrated(&self) -> f64 {
        self.theta_a_integrated
    }

    pub fn grid(&self) -> &[ProfileNode] {
        &self.grid
    }

    /// The profile is even in θ by construction.
    pub fn is_even(&self) -> bool {
        true
    }

    /// `[f, f', f'', f''']` at `θ`; `|θ|` is clamped to `θ_a`.
    ///
    /// `f'''` is taken from the equation, `f''' = ½ H''(f) f'` with `H = f'²`, rather than
    /// from the interpolant, whose third derivative is noisy on short intervals.
    pub fn eval(&self, theta: f64) -> [f64; 4] {
        let s = theta.abs().min(self.theta_a);
        let [f, d1, d2, _] = self.interp.eval_all(s);
        let d3 = 0.5 * h_second(f, d1 * d1, self.p) * d1;
        if theta < 0.0 {
            [f, -d1, d2, -d3]
        } else {
            [f, d1, d2, d3]
        }
    }

    /// Largest `|profile_residual|` over the grid nodes and `extra` interior points per interval,
    /// using the interpolant's derivatives.
    pub fn max_residual(&self, extra: usize) -> f64 {
        let mut worst = 0.0f64;
        for w in self.grid.windows(2) {
            for j in 0..=extra {
                let theta = w[0].theta + (w[1].theta - w[0].theta) * j as f64 / (extra + 1) as f64;
                let [f, d1, d2, _] = self.eval(theta);
                worst = worst.max(profile_residual(f, d1, d2, self.p).abs());
            }
        }
        worst
    }
}

/// Calibrate `a` with the default ODE settings.
pub fn calibrate_a(target_half_angle: f64, p: f64, tol: f64) -> Result<f64> {
    calibrate_a_with(target_half_angle, p, tol, &OdeConfig::default())
}

/// Find `a` with `|θ_a − target| ≤ tol` by geometric bisection; `θ_a` is increasing in `a`.
pub fn calibrate_a_with(target: f64, p: f64, tol: f64, cfg: &OdeConfig) -> Result<f64> {
    check_p(p)?;
    let critical = wedge_ode::critical_half_angle_closed(p);
    if !(target > 0.0) {
        return Err(Error::Domain(format!("target half-angle {target} must be positive")));
    }
    if target >= critical - CRITICAL_MARGIN {
        return Err(Error::OutOfRange { target, critical, p });
    }
    let theta = |a: f64| wedge_ode::theta_a(a, p, cfg);

    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    let mut f1 = theta(1.0)? - target;
    if f1.abs() <= tol {
        return Ok(1.0);
    }
    if f1 > 0.0 {
        while f1 > 0.0 {
            lo /= 4.0;
            if lo < 1e-12 {
                return Err(Error::NonConvergence(format!("no bracket for half-angle {target}")));
            }
            f1 = theta(lo)? - target;
            if f1.abs() <= tol {
                return Ok(lo);
            }
        }
        hi = lo * 4.0;
    } else {
        while f1 < 0.0 {
            hi *= 4.0;
            if hi > 1e12 {
                return Err(Error::OutOfRange { target, critical, p });
            }
            f1 = theta(hi)? - target;
            if f1.abs() <= tol {
                return Ok(hi);
            }
        }
        lo = hi / 4.0;
    }

    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let f = theta(mid)? - target;
        if f.abs() <= tol || hi / lo - 1.0 < 1e-15 {
            return Ok(mid);
        }
        if f > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::NonConvergence(format!("bisection for half-angle {target} did not settle")))
}

/// Build the profile for shooting parameter `a` with default ODE settings.
pub fn build_profile(a: f64, p: f64, n_nodes: usize) -> Result<AngularProfile> {
    build_profile_with(a, p, n_nodes, &OdeConfig::default())
}

pub fn build_profile_with(a: f64, p: f64, n_nodes: usize, cfg: &OdeConfig) -> Result<AngularProfile> {
    check_p(p)?;
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!("shooting parameter a = {a} must be finite and positive")));
    }
    if n_nodes < 16 {
        return Err(Error::Domain(format!("n_nodes = {n_nodes} must be at least 16")));
    }
    let g = wedge_ode::solve_g(a, p, cfg)?;
    let theta_a = wedge_ode::theta_from_profile(&g, cfg)?;
    let node_at = |theta: f64, y: f64| {
        let h = h_extended(a, y, &g);
        ProfileNode { theta, y, yp: -h.max(0.0).sqrt(), ypp: 0.5 * h_prime(y, h, p) }
    };

    // H(a) = 0 makes y' = −√H non-Lipschitz at the top, so start from the series
    // y = a − kθ²/2 − k H''(a) θ⁴/48 with k = p(1 + 2a).
    let k = p * (1.0 + 2.0 * a);
    let h2 = h_second(a, 0.0, p);
    // H''(a) grows like a⁻² for small a; keep the quartic correction below 1e-4 relative
    // so that the neglected sextic term stays far below the handoff tolerance.
    let theta0 = HANDOFF_THETA.min(theta_a / 100.0).min(1e-2 * (24.0 / h2.abs()).sqrt());
    let y0 = a - 0.5 * k * theta0 * theta0 - k * h2 * theta0.powi(4) / 48.0;
    let yp_series = -k * theta0 - k * h2 * theta0.powi(3) / 12.0;
    let start = node_at(theta0, y0);
    let gap = (start.yp - yp_series).abs() / yp_series.abs();
    if !(gap <= HANDOFF_GAP) {
        return Err(Error::DegenerateStart { theta: theta0, relative_gap: gap });
    }

    // Perturbations of y grow like θ/θ₀ away from the degenerate top, so the error control
    // is applied to the deficit z = a − y, which is small there, instead of to y itself.
    let y_stop = STOP_FRACTION * a;
    let opts = Dp5Options {
        rel_tol: 1e-11,
        abs_tol: 1e-15 * a,
        max_steps: cfg.max_steps,
        h_max: theta_a / 64.0,
        h_init: Some(0.1 * theta0),
    };
    let nodes = ode::integrate(
        |_, z| h_extended(a, a - z, &g).max(0.0).sqrt(),
        theta0,
        a - y0,
        2.0 * theta_a,
        &opts,
        |_, z| a - z <= y_stop,
    )?;
    let last = nodes[nodes.len() - 1];
    if a - last.y > y_stop {
        return Err(Error::NonConvergence(format!("profile did not reach y = {y_stop}")));
    }

    let mut dense = vec![ProfileNode { theta: 0.0, y: a, yp: 0.0, ypp: -k }];
    dense.extend(nodes[..nodes.len() - 1].iter().map(|n: &Node| node_at(n.t, a - n.y)));
    let prev = dense[dense.len() - 1];
    let theta_stop = crossing(prev, node_at(last.t, a - last.y), y_stop);
    dense.push(node_at(theta_stop, y_stop));

    let tail = quad::integrate(|w| 1.0 / h_extended(a, w, &g).sqrt(), 0.0, y_stop, &QuadOptions::default())?;
    let theta_a_integrated = theta_stop + tail.value;
    if !((theta_a_integrated - theta_a).abs() < 1e-6 * theta_a) {
        return Err(Error::NonConvergence(format!(
            "integrated aperture {theta_a_integrated} disagrees with quadrature {theta_a}"
        )));
    }
    dense.push(node_at(theta_a, 0.0));
    let dense = AngularProfile::assemble(a, p, theta_a, theta_a_integrated, dense);

    let n = n_nodes;
    let grid = (0..n)
        .map(|i| {
            if i == 0 {
                return Ok(ProfileNode { theta: 0.0, y: a, yp: 0.0, ypp: -k });
            }
            if i == n - 1 {
                return Ok(node_at(theta_a, 0.0));
            }
            let s = i as f64 / (n - 1) as f64;
            let c = (std::f64::consts::PI * s).cos();
            let y = dense.eval(theta_a * (CHEBYSHEV_WEIGHT * 0.5 * (1.0 - c) + (1.0 - CHEBYSHEV_WEIGHT) * s))[0];
            Ok(node_at(angle_of(a, y, theta_a, &g)?, y))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AngularProfile::assemble(a, p, theta_a, theta_a_integrated, grid))
}

/// `θ(y) = ∫_y^a dw / √H(w)`, the exact inverse of the profile.
///
/// Grid nodes are placed at `(θ(y), y)` rather than at `(θ, y(θ))` from the integrator:
/// near the endpoints the node spacing is so fine that any inconsistency between
/// node values and the slopes `−√H(y)` shows up magnified in the interpolated `f''`.
fn angle_of(a: f64, y: f64, theta_a: f64, g: &GProfile) -> Result<f64> {
    let opts = QuadOptions::default();
    if y <= 0.5 * a {
        let below = quad::integrate(|w| 1.0 / h_extended(a, w, g).sqrt(), 0.0, y, &opts)?;
        Ok(theta_a - below.value)
    } else {
        // w = a − v² removes the square-root singularity at the top, where H ≈ 2k v².
        let k = g.p() * (1.0 + 2.0 * a);
        let top = 2.0 / (2.0 * k).sqrt();
        let f = |v: f64| {
            if v == 0.0 {
                top
            } else {
                2.0 * v / (a * a * g.q_at(-(-v * v / a).ln_1p())).sqrt()
            }
        };
        Ok(quad::integrate(f, 0.0, (a - y).max(0.0).sqrt(), &opts)?.value)
    }
}

/// θ in `[n0.theta, n1.theta]` where the quintic through the two nodes equals `level`.
fn crossing(n0: ProfileNode, n1: ProfileNode, level: f64) -> f64 {
    let q = QuinticHermite::new(vec![n0.theta, n1.theta], vec![n0.y, n1.y], vec![n0.yp, n1.yp], vec![n0.ypp, n1.ypp]);
    let (mut lo, mut hi) = (n0.theta, n1.theta);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if q.eval(mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
