//! `u(x) = r² f(θ)` on a wedge, its derivatives, and finite-difference checks of `Δₚ u = −1`.
//!
//! The game p-Laplacian is `Δₚ = (1/p) Δ + (1/q − 1/p) Δ_∞` with
//! `Δ_∞ u = |∇u|⁻² ∇uᵀ D²u ∇u`.

use crate::error::{Error, Result};
use crate::geom::{Sym2, Vec2};
use crate::profile::{self, AngularProfile};
use crate::wedge_ode::{self, check_p};

/// Gradients below this norm make `Δ_∞` undefined.
pub const CRITICAL_GRADIENT: f64 = 1e-8;

/// Finite-difference step as a fraction of the wedge width `|x| θ_a` at `x`.
pub const FD_RELATIVE_STEP: f64 = 1e-3;

/// Default fraction of the gap to the critical aperture by which the solution wedge is enlarged.
pub const DEFAULT_ENLARGEMENT: f64 = 0.05;

/// Value, gradient and Hessian of a scalar field at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub u: f64,
    pub grad: Vec2,
    pub hess: Sym2,
}

/// Game p-Laplacian from a gradient and Hessian.
pub fn game_p_laplacian(grad: Vec2, hess: Sym2, p: f64) -> Result<f64> {
    let g2 = grad.norm_sq();
    if g2.sqrt() < CRITICAL_GRADIENT {
        return Err(Error::CriticalPoint(g2.sqrt()));
    }
    let q = p / (p - 1.0);
    let laplace = hess.trace();
    let infinity = hess.quad(grad) / g2;
    Ok(laplace / p + (1.0 / q - 1.0 / p) * infinity)
}

/// `Δₚ field(x)` from central differences with step `h`.
pub fn game_p_laplacian_fd<F: Fn(Vec2) -> f64>(field: F, x: Vec2, h: f64, p: f64) -> Result<f64> {
    check_p(p)?;
    if !(h > 0.0) {
        return Err(Error::Domain(format!("step h = {h} must be positive")));
    }
    let (ex, ey) = (Vec2::new(h, 0.0), Vec2::new(0.0, h));
    let f0 = field(x);
    let (fxp, fxm) = (field(x + ex), field(x - ex));
    let (fyp, fym) = (field(x + ey), field(x - ey));
    let grad = Vec2::new((fxp - fxm) / (2.0 * h), (fyp - fym) / (2.0 * h));
    let h2 = h * h;
    let xx = (fxp - 2.0 * f0 + fxm) / h2;
    let yy = (fyp - 2.0 * f0 + fym) / h2;
    let xy = (field(x + ex + ey) - field(x + ex - ey) - field(x - ex + ey) + field(x - ex - ey)) / (4.0 * h2);
    game_p_laplacian(grad, Sym2::new(xx, xy, yy), p)
}

/// `φ(x) = (x − c)ᵀ A (x − c) + (ξ, x − c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticForm {
    pub a: Sym2,
    pub xi: Vec2,
    pub center: Vec2,
}

impl QuadraticForm {
    pub fn new(a: Sym2, xi: Vec2, center: Vec2) -> Self {
        Self { a, xi, center }
    }

    pub fn value(&self, x: Vec2) -> f64 {
        let d = x - self.center;
        self.a.quad(d) + self.xi.dot(d)
    }
}

/// Exact `Δₚ φ` at the center: `(2/p) Tr A + (1/q − 1/p) · 2 ξᵀAξ / |ξ|²`.
pub fn deltap_quadratic(form: &QuadraticForm, p: f64) -> Result<f64> {
    check_p(p)?;
    game_p_laplacian(form.xi, form.a.scale(2.0), p)
}

/// The explicit solution on the wedge of half-aperture `θ_a` with vertex at the origin,
/// together with the (possibly smaller, translated) wedge on which it is used.
#[derive(Debug, Clone)]
pub struct PSolution {
    profile: AngularProfile,
    wedge_half_angle: f64,
    translation: Vec2,
}

impl PSolution {
    /// Use the profile on its own wedge.
    pub fn new(profile: AngularProfile) -> Self {
        let wedge_half_angle = profile.theta_a();
        Self { profile, wedge_half_angle, translation: Vec2::ZERO }
    }

    /// Solve on the enlarged aperture `η₁ = η + κ (η_crit − η)` and pair it with the
    /// wedge `W_η + 2(α + 1) e₁`, on which all derivatives of `u` stay bounded and `|∇u|`
    /// stays away from zero. `eta` is the full aperture.
    pub fn for_game_wedge(eta: f64, p: f64, alpha: f64, enlargement: f64, n_nodes: usize) -> Result<Self> {
        check_p(p)?;
        let critical = 2.0 * wedge_ode::critical_half_angle_closed(p);
        if !(eta > 0.0 && eta < critical) {
            return Err(Error::OutOfRange { target: 0.5 * eta, critical: 0.5 * critical, p });
        }
        if !(enlargement > 0.0 && enlargement < 1.0) {
            return Err(Error::Domain(format!("enlargement {enlargement} must lie in (0, 1)")));
        }
        let eta1 = eta + enlargement * (critical - eta);
        let a = profile::calibrate_a(0.5 * eta1, p, 1e-10)?;
        let profile = profile::build_profile(a, p, n_nodes)?;
        Ok(Self { profile, wedge_half_angle: 0.5 * eta, translation: Vec2::E1 * (2.0 * (alpha + 1.0)) })
    }

    pub fn profile(&self) -> &AngularProfile {
        &self.profile
    }

    pub fn p(&self) -> f64 {
        self.profile.p()
    }

    /// Half-aperture of the wedge the solution is used on.
    pub fn wedge_half_angle(&self) -> f64 {
        self.wedge_half_angle
    }

    /// Vertex of the wedge the solution is used on.
    pub fn translation(&self) -> Vec2 {
        self.translation
    }

    /// Half-aperture of the wedge on which `u` vanishes on the boundary.
    pub fn solution_half_angle(&self) -> f64 {
        self.profile.theta_a()
    }

    /// `u(x)`; points outside the solution wedge are treated as lying on its boundary.
    pub fn u(&self, x: Vec2) -> f64 {
        x.norm_sq() * self.profile.eval(x.angle())[0]
    }

    /// `∇u(x) = r (2f e_r + f' e_θ)`.
    pub fn grad(&self, x: Vec2) -> Vec2 {
        let r = x.norm();
        let theta = x.angle();
        let [f, d1, _, _] = self.profile.eval(theta);
        let er = Vec2::from_polar(1.0, theta);
        (er * (2.0 * f) + er.perp() * d1) * r
    }

    /// `u`, `∇u` and `D²u` by the polar chain rule.
    pub fn eval_u(&self, x: Vec2) -> Result<Jet> {
        let r = x.norm();
        let theta = x.angle();
        if !x.is_finite() || theta.abs() > self.profile.theta_a() * (1.0 + 1e-12) {
            return Err(Error::OutsideDomain(x.x, x.y));
        }
        if r == 0.0 {
            return Err(Error::Domain("derivatives of u are undefined at the vertex".into()));
        }
        let [f, d1, d2, _] = self.profile.eval(theta);
        let er = Vec2::from_polar(1.0, theta);
        let et = er.perp();
        let mixed = Sym2::new(2.0 * er.x * et.x, er.x * et.y + er.y * et.x, 2.0 * er.y * et.y);
        let hess = Sym2::outer(er).scale(2.0 * f) + mixed.scale(d1) + Sym2::outer(et).scale(2.0 * f + d2);
        Ok(Jet { u: r * r * f, grad: (er * (2.0 * f) + et * d1) * r, hess })
    }

    /// The third derivative is `c(x) e_θ⊗e_θ⊗e_θ` with `c = (4f' + f''') / r`; returns `c`.
    pub fn third_derivative(&self, x: Vec2) -> f64 {
        let [_, d1, _, d3] = self.profile.eval(x.angle());
        (4.0 * d1 + d3) / x.norm()
    }

    /// `Δₚ u(x)` from the exact derivatives.
    pub fn deltap_exact(&self, x: Vec2) -> Result<f64> {
        let jet = self.eval_u(x)?;
        game_p_laplacian(jet.grad, jet.hess, self.p())
    }

    /// `Δₚ u(x)` by central differences with step [`Self::fd_step`].
    pub fn deltap_fd(&self, x: Vec2) -> Result<f64> {
        self.eval_u(x)?;
        game_p_laplacian_fd(|y| self.u(y), x, self.fd_step(x), self.p())
    }

    /// Step used by [`Self::deltap_fd`]. The profile varies on the angular scale `θ_a`, so a
    /// step proportional to `|x|` alone loses accuracy in narrow wedges.
    pub fn fd_step(&self, x: Vec2) -> f64 {
        FD_RELATIVE_STEP * x.norm() * self.solution_half_angle()
    }

    /// Points of the working wedge within `r_max` of its vertex, clustered towards the vertex,
    /// where derivative ratios peak.
    pub fn sample_points(&self, r_max: f64, n_radial: usize, n_angular: usize) -> Vec<Vec2> {
        let mut pts = Vec::with_capacity(n_radial * n_angular + 1);
        pts.push(self.translation);
        for i in 1..=n_radial {
            let s = i as f64 / n_radial as f64;
            let rho = r_max * s * s;
            for j in 0..n_angular {
                let phi = self.wedge_half_angle * (2.0 * j as f64 / (n_angular - 1).max(1) as f64 - 1.0);
                pts.push(self.translation + Vec2::from_polar(rho, phi));
            }
        }
        pts
    }
}
