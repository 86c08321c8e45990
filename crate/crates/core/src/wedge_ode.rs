//! The shooting family `G_a` on `(0, 1]`, its limit `K = lim_{a→∞} G_a`, the half-aperture
//! `θ_a = ∫₀¹ du / (u √G_a(u))`, and the critical half-angle.
//!
//! `G_a' = −F_a(y, G_a)` with `G_a(1) = 0`. Since `G_a` blows up like `c / y²` at the origin,
//! the solver works with `Q(t) = y² G(y)` in the variable `t = −ln y`, which stays bounded.
//! `a = f64::INFINITY` selects the limit equation for `K`.

use std::f64::consts::{FRAC_PI_2, LN_2};

use crate::error::{Error, Result};
use crate::numerics::hermite::QuinticHermite;
use crate::numerics::ode::{self, Dp5Options};
use crate::numerics::quad::{self, QuadOptions};

/// Largest step in `t` taken by the `Q` integrator. Bounds the interpolation error of the
/// stored profile independently of how smooth the solution is.
const T_STEP_MAX: f64 = 0.01;

/// Width of the analytically closed window `[1 − δ, 1]` in the limit-route integral.
const K_ROUTE_DELTA: f64 = 1e-8;

/// Cutoff for the rational integral; the remainder beyond it is summed analytically.
const RATIONAL_CUTOFF: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Lower end of the integration range in `y`; a power law covers `(0, y_min)`.
    pub y_min: f64,
    pub max_steps: usize,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-12, y_min: 1e-6, max_steps: 100_000 }
    }
}

impl OdeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.y_min > 0.0 && self.y_min < 1.0) {
            return Err(Error::Domain(format!("y_min = {} must lie in (0, 1)", self.y_min)));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Domain("tolerances must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Domain("max_steps must be at least 1".into()));
        }
        Ok(())
    }

    fn quad_options(&self) -> QuadOptions {
        QuadOptions {
            abs_tol: (0.1 * self.abs_tol).max(1e-15),
            rel_tol: (0.1 * self.rel_tol).max(1e-14),
            max_subdivisions: 4000,
        }
    }
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("exponent p = {p} must be finite and > 1")))
    }
}

fn check_a(a: f64) -> Result<()> {
    if a > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("shooting parameter a = {a} must be positive")))
    }
}

fn inv(a: f64) -> f64 {
    if a.is_infinite() {
        0.0
    } else {
        1.0 / a
    }
}

/// `F_a(y, w)`; `a = ∞` gives `F_∞(y, w) = [16p + 4(3p−2)w + 2(p−1)w²] / (y[4 + (p−1)w])`.
pub fn eval_slope(a: f64, y: f64, w: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    check_a(a)?;
    if !(y > 0.0) {
        return Err(Error::Domain(format!("y = {y} must be positive")));
    }
    if !(w >= 0.0) {
        return Err(Error::Domain(format!("w = {w} must be nonnegative")));
    }
    Ok(slope_unchecked(inv(a), y, w, p))
}

fn slope_unchecked(inv_a: f64, y: f64, w: f64, p: f64) -> f64 {
    let num = 8.0 * p * (inv_a + 2.0 * y) + (2.0 * p * inv_a + 4.0 * (3.0 * p - 2.0) * y + 2.0 * (p - 1.0) * y * w) * w;
    num / (y * y * (4.0 + (p - 1.0) * w))
}

/// `dQ/dt` for `Q = y² G`, `y = e^{−t}`.
fn q_rate(inv_a: f64, p: f64, t: f64, q: f64) -> f64 {
    let y = (-t).exp();
    let y2 = y * y;
    let num = 2.0 * (p - 1.0) * q * q
        + 4.0 * (3.0 * p - 2.0) * q * y2
        + 16.0 * p * y2 * y2
        + inv_a * (2.0 * p * q * y + 8.0 * p * y2 * y);
    -2.0 * q + num / (4.0 * y2 + (p - 1.0) * q)
}

/// `d²Q/dt²` along the solution through `(t, q)`.
fn q_accel(inv_a: f64, p: f64, t: f64, q: f64) -> f64 {
    let y = (-t).exp();
    let y2 = y * y;
    let n = 2.0 * (p - 1.0) * q * q
        + 4.0 * (3.0 * p - 2.0) * q * y2
        + 16.0 * p * y2 * y2
        + inv_a * (2.0 * p * q * y + 8.0 * p * y2 * y);
    let d = 4.0 * y2 + (p - 1.0) * q;
    let n_q = 4.0 * (p - 1.0) * q + 4.0 * (3.0 * p - 2.0) * y2 + inv_a * 2.0 * p * y;
    let n_y = 8.0 * (3.0 * p - 2.0) * q * y + 64.0 * p * y2 * y + inv_a * (2.0 * p * q + 24.0 * p * y2);
    let d_q = p - 1.0;
    let d_y = 8.0 * y;
    let f_t = -y * (n_y * d - n * d_y) / (d * d);
    let f_q = -2.0 + (n_q * d - n * d_q) / (d * d);
    f_t + f_q * (-2.0 * q + n / d)
}

/// A solved `G_a` (or `K` when `a = ∞`), stored as a quintic Hermite interpolant of
/// `Q(t) = y² G(y)` on `t ∈ [0, −ln y_min]`.
#[derive(Debug, Clone)]
pub struct GProfile {
    a: f64,
    p: f64,
    y_min: f64,
    t_max: f64,
    q: QuinticHermite,
    q_rate0: f64,
    /// `(c, b)` in `Q ≈ c + b y` below `y_min`.
    tail: (f64, f64),
}

impl GProfile {
    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    /// True for the `a = ∞` profile `K`.
    pub fn is_limit(&self) -> bool {
        self.a.is_infinite()
    }

    pub fn interp_order(&self) -> usize {
        5
    }

    /// `Q(t)`. Past the last node it is continued as `c + b e^{−t}`, matching value and slope.
    pub fn q_at(&self, t: f64) -> f64 {
        if t >= self.t_max {
            let (c, b) = self.tail;
            c + b * (-t).exp()
        } else {
            self.q.eval(t.max(0.0))
        }
    }

    /// `c = lim_{y→0} y² G(y)`, extrapolated from `y_min`.
    pub fn tail_constant(&self) -> f64 {
        self.tail.0
    }

    /// `G(y)` for `y ∈ (0, 1]`; below `y_min` the continuation `(c + b y) / y²` is used.
    pub fn g(&self, y: f64) -> f64 {
        self.q_at(-y.ln()) / (y * y)
    }

    /// `G'(y) = −F_a(y, G(y))`.
    pub fn dg(&self, y: f64) -> f64 {
        -slope_unchecked(inv(self.a), y, self.g(y), self.p)
    }

    /// Integration nodes as `(y, G)` pairs in increasing `y`, ending at `(1, 0)`.
    pub fn samples(&self) -> Vec<(f64, f64)> {
        self.q
            .knots()
            .iter()
            .rev()
            .map(|&t| {
                let y = (-t).exp();
                (y, self.q.eval(t) / (y * y))
            })
            .collect()
    }

    /// `−d ln G / d ln y = y F_a(y, G) / G`; tends to 2 at the origin.
    pub fn local_log_slope(&self, y: f64) -> f64 {
        let g = self.g(y);
        y * slope_unchecked(inv(self.a), y, g, self.p) / g
    }

    pub(crate) fn t_knots(&self) -> &[f64] {
        self.q.knots()
    }
}

/// Integrate `G_a' = −F_a(y, G_a)`, `G_a(1) = 0` from `y = 1` down to `cfg.y_min`.
pub fn solve_g(a: f64, p: f64, cfg: &OdeConfig) -> Result<GProfile> {
    check_p(p)?;
    check_a(a)?;
    cfg.validate()?;
    let inv_a = inv(a);
    let t_max = -cfg.y_min.ln();
    let opts = Dp5Options {
        rel_tol: cfg.rel_tol,
        abs_tol: cfg.abs_tol,
        max_steps: cfg.max_steps,
        h_max: T_STEP_MAX,
        h_init: None,
    };
    let nodes = ode::integrate(|t, q| q_rate(inv_a, p, t, q), 0.0, 0.0, t_max, &opts, |_, _| false)?;
    let q_rate0 = nodes[0].dy;
    let (mut ts, mut qs, mut d1, mut d2) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for n in nodes {
        ts.push(n.t);
        qs.push(n.y);
        d1.push(n.dy);
        d2.push(q_accel(inv_a, p, n.t, n.y));
    }
    let q = QuinticHermite::new(ts, qs, d1, d2);
    let [q_end, dq_end, _, _] = q.eval_all(t_max);
    let tail = (q_end + dq_end, -dq_end / cfg.y_min);
    Ok(GProfile { a, p, y_min: cfg.y_min, t_max, q, q_rate0, tail })
}

/// `∫ du / (u √G(u))` over `(0, 1 − v_lo²)`.
///
/// On `u ∈ [1/2, 1]` the substitution `u = 1 − v²` removes the square-root singularity
/// (`G ≈ G'(1)(u − 1)`); on `(y_min, 1/2]` the integrand is `e^{−t} / √Q(t)`; below
/// `y_min` the continuation `Q ≈ c + b u` is integrated exactly.
fn aperture_integral(g: &GProfile, v_lo: f64, opts: &QuadOptions) -> Result<f64> {
    let v_hi = std::f64::consts::FRAC_1_SQRT_2;
    let q0_rate = g.q_rate0;
    let near_one = |v: f64| {
        if v == 0.0 {
            2.0 / q0_rate.sqrt()
        } else {
            let t = -(-v * v).ln_1p();
            2.0 * v / g.q_at(t).sqrt()
        }
    };
    // Split both pieces at the interpolation knots, where the integrand is only C².
    let mut v_breaks = vec![v_lo];
    let mut t_breaks = vec![LN_2];
    for &t in g.t_knots() {
        if t > 0.0 && t < LN_2 {
            let v = (-(-t).exp_m1()).sqrt();
            if v > v_lo {
                v_breaks.push(v);
            }
        } else if t > LN_2 && t < g.t_max {
            t_breaks.push(t);
        }
    }
    v_breaks.push(v_hi);
    t_breaks.push(g.t_max);

    let upper = quad::integrate_with_breaks(near_one, &v_breaks, opts)?;
    let lower = quad::integrate_with_breaks(|t| (-t).exp() / g.q_at(t).sqrt(), &t_breaks, opts)?;
    // ∫₀^{y_min} du / √(c + b u)
    let (c, b) = g.tail;
    let tail = 2.0 * g.y_min / ((c + b * g.y_min).sqrt() + c.sqrt());
    Ok(upper.value + lower.value + tail)
}

/// Half-aperture `θ_a` of the profile with `f(0) = a`, computed from an existing solve.
pub fn theta_from_profile(g: &GProfile, cfg: &OdeConfig) -> Result<f64> {
    if g.is_limit() {
        return Err(Error::Domain("theta_a needs a finite shooting parameter".into()));
    }
    aperture_integral(g, 0.0, &cfg.quad_options())
}

/// `θ_a = ∫₀¹ du / (u √G_a(u))`.
pub fn theta_a(a: f64, p: f64, cfg: &OdeConfig) -> Result<f64> {
    if a.is_infinite() {
        return Err(Error::Domain("theta_a needs a finite shooting parameter".into()));
    }
    let g = solve_g(a, p, cfg)?;
    theta_from_profile(&g, cfg)
}

/// `(π/2)[1 − ½√(2(p−1)/p)]`, the supremum of `θ_a` over `a`.
pub fn critical_half_angle_closed(p: f64) -> f64 {
    FRAC_PI_2 * (1.0 - 0.5 * (2.0 * (p - 1.0) / p).sqrt())
}

/// The same supremum evaluated as `2 ∫₀^∞ (4 + (p−1)z²) / (2(p−1)z⁴ + 4(3p−2)z² + 16p) dz`.
///
/// Adaptive quadrature on `[0, Z]` plus the asymptotic series of the integrand,
/// `1/(2z²) + c₄/z⁴ + c₆/z⁶ + …`, summed analytically on `[Z, ∞)`.
pub fn critical_half_angle_quadrature(p: f64, tol: f64) -> Result<f64> {
    check_p(p)?;
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    let z_max = RATIONAL_CUTOFF;
    let opts = QuadOptions { abs_tol: 0.05 * tol, rel_tol: 1e-15, max_subdivisions: 2000 };
    let body = quad::integrate_with_breaks(|z| rational_integrand(z, p), &[0.0, 1.0, 10.0, 100.0, z_max], &opts)?;

    let b1 = 2.0 * (3.0 * p - 2.0) / (p - 1.0);
    let b2 = 8.0 * p / (p - 1.0);
    let c4 = (4.0 - 3.0 * p) / (p - 1.0);
    let c6 = 0.5 * (b1 * b1 - b2) - 2.0 * b1 / (p - 1.0);
    let tail = 1.0 / (2.0 * z_max) + c4 / (3.0 * z_max.powi(3));
    let remainder = c6.abs() / (5.0 * z_max.powi(5));

    let estimate = 2.0 * (body.error + remainder);
    if estimate > tol {
        return Err(Error::QuadratureAccuracy { estimate, tolerance: tol });
    }
    Ok(2.0 * (body.value + tail))
}

/// `(4 + (p−1)z²) / (2(p−1)z⁴ + 4(3p−2)z² + 16p)`.
pub fn rational_integrand(z: f64, p: f64) -> f64 {
    let z2 = z * z;
    (4.0 + (p - 1.0) * z2) / (2.0 * (p - 1.0) * z2 * z2 + 4.0 * (3.0 * p - 2.0) * z2 + 16.0 * p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalAngleResult {
    pub p: f64,
    pub half_angle_closed: f64,
    pub half_angle_quadrature: f64,
    pub discrepancy: f64,
}

pub fn critical_angle(p: f64, tol: f64) -> Result<CriticalAngleResult> {
    let half_angle_quadrature = critical_half_angle_quadrature(p, tol)?;
    let half_angle_closed = critical_half_angle_closed(p);
    Ok(CriticalAngleResult {
        p,
        half_angle_closed,
        half_angle_quadrature,
        discrepancy: (half_angle_closed - half_angle_quadrature).abs(),
    })
}

/// `lim_{a→∞} θ_a = ∫₀¹ du / (u √K(u))` from the solved limit profile.
///
/// The window `[1 − δ, 1]` uses `K ≈ 4p(1 − u)`, which integrates to `artanh(√δ) / √p`.
pub fn k_route_half_angle(p: f64, cfg: &OdeConfig) -> Result<f64> {
    let k = solve_g(f64::INFINITY, p, cfg)?;
    let delta = K_ROUTE_DELTA;
    let window = delta.sqrt().atanh() / p.sqrt();
    Ok(aperture_integral(&k, delta.sqrt(), &cfg.quad_options())? + window)
}

/// `ln K(y_min) / (−ln y_min)` for the limit profile.
///
/// Because `K(y) y² → c ≠ 1` this ratio approaches 2 only logarithmically slowly:
/// it equals `2 + ln c / (−ln y_min)`. [`GProfile::local_log_slope`] converges much faster.
pub fn asymptotic_exponent_check(profile: &GProfile) -> Result<f64> {
    if !profile.is_limit() {
        return Err(Error::Domain("exponent check needs the a = ∞ profile".into()));
    }
    if profile.y_min > 1e-3 {
        return Err(Error::Domain(format!("y_min = {} must be at most 1e-3 for the exponent check", profile.y_min)));
    }
    let y = profile.y_min;
    Ok(profile.g(y).ln() / -y.ln())
}
