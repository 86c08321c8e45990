//! Tug-of-war with noise.
//!
//! At each turn a fair coin picks a mover. Away from the boundary (distance > αε) the mover
//! picks `v` with `|v| ≤ ε` and the position becomes `x + v + z`, with `z` drawn from the
//! noise measure scaled and rotated onto `v`. Within αε of the boundary the mover picks an
//! exit point on the boundary at most αε away and the game ends.
//!
//! The canonical noise is the two-point measure `{±s e₂}` with `s = 1/√(p−1)`: rotated onto
//! `v` it is `±s v⊥`. It has `C₁₁ = 0`, `C₂₂ = s²`, hence `β = q` and `α = 1 + s`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geom::{Sym2, Vec2};
use crate::psolution::{PSolution, QuadraticForm};
use crate::wedge_ode::check_p;

/// Relative slack in the move bounds and in the boundary-rule test, so that positions
/// exactly αε from the boundary are treated alike whatever the rounding.
const MOVE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameParams {
    pub p: f64,
    pub q: f64,
    pub beta: f64,
    /// Noise amplitude as a multiple of `|v|`.
    pub s: f64,
    pub alpha: f64,
    pub eps: f64,
    pub seed: u64,
}

impl GameParams {
    /// Parameters for the canonical two-point noise.
    pub fn canonical(p: f64, eps: f64, seed: u64) -> Result<Self> {
        check_p(p)?;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Domain(format!("step size eps = {eps} must lie in (0, 1)")));
        }
        let q = p / (p - 1.0);
        let s = 1.0 / (p - 1.0).sqrt();
        Ok(Self { p, q, beta: q, s, alpha: 1.0 + s, eps, seed })
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        Self::canonical(self.p, eps, self.seed)
    }

    /// Noise covariance along `e₁` and across it, before rotation.
    pub fn noise_covariance(&self) -> (f64, f64) {
        (0.0, self.s * self.s)
    }

    /// `B = (β/q − β/p) A + (β/p) Tr A · I`.
    pub fn b_matrix(&self, a: Sym2) -> Sym2 {
        a.scale(self.beta / self.q - self.beta / self.p) + Sym2::IDENTITY.scale(self.beta / self.p * a.trace())
    }
}

/// Draw `z` from the noise measure rotated onto `v`.
pub fn sample_noise<R: Rng + ?Sized>(v: Vec2, params: &GameParams, rng: &mut R) -> Vec2 {
    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    v.perp() * (sign * params.s)
}

/// `ψ(v) = (ξ, v) + vᵀBv`, the expected value of `φ` after the move `v` plus noise.
pub fn psi_exact(form: &QuadraticForm, v: Vec2, params: &GameParams) -> f64 {
    form.xi.dot(v) + params.b_matrix(form.a).quad(v)
}

/// `Δ_∞ ψ(0) = 2 ξᵀBξ / |ξ|²`.
pub fn infinity_laplacian_psi(form: &QuadraticForm, params: &GameParams) -> Result<f64> {
    let n2 = form.xi.norm_sq();
    if n2 == 0.0 {
        return Err(Error::CriticalPoint(0.0));
    }
    Ok(2.0 * params.b_matrix(form.a).quad(form.xi) / n2)
}

/// Monte Carlo estimate of `ψ(v)` with its standard error.
pub fn psi_mc<R: Rng + ?Sized>(
    form: &QuadraticForm,
    v: Vec2,
    params: &GameParams,
    n: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if n < 1000 {
        return Err(Error::Domain(format!("psi_mc needs at least 1000 samples, got {n}")));
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..n {
        let z = sample_noise(v, params, rng);
        let x = form.value(form.center + v + z);
        let d = x - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (x - mean);
    }
    let var = m2 / (n - 1) as f64;
    Ok((mean, (var / n as f64).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    /// `{ |arg(x − vertex)| < η/2 }`, symmetric about `e₁`; `eta` is the full aperture.
    Wedge { eta: f64, vertex: Vec2 },
    /// `{ x₁ > 0 }`.
    HalfPlane,
    /// `{ x₁ > 0, |x₂| < A x₁^γ }`.
    ParabolaLike { a: f64, gamma: f64 },
}

impl Domain {
    pub fn wedge(eta: f64, vertex: Vec2) -> Result<Self> {
        if !(eta > 0.0 && eta < 2.0 * std::f64::consts::PI) {
            return Err(Error::Domain(format!("wedge aperture {eta} must lie in (0, 2π)")));
        }
        Ok(Domain::Wedge { eta, vertex })
    }

    pub fn parabola_like(a: f64, gamma: f64) -> Result<Self> {
        if !(a > 0.0 && gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Domain(format!("need A > 0 and 0 < γ < 1, got A = {a}, γ = {gamma}")));
        }
        Ok(Domain::ParabolaLike { a, gamma })
    }

    pub fn contains(&self, x: Vec2) -> bool {
        match *self {
            Domain::Wedge { eta, vertex } => {
                let d = x - vertex;
                d != Vec2::ZERO && d.angle().abs() < 0.5 * eta
            }
            Domain::HalfPlane => x.x > 0.0,
            Domain::ParabolaLike { a, gamma } => x.x > 0.0 && x.y.abs() < a * x.x.powf(gamma),
        }
    }

    /// Distance to the boundary for points in the closure.
    pub fn dist_to_boundary(&self, x: Vec2) -> f64 {
        (self.nearest_boundary_point(x) - x).norm()
    }

    pub fn nearest_boundary_point(&self, x: Vec2) -> Vec2 {
        match *self {
            Domain::Wedge { eta, vertex } => {
                let d = x - vertex;
                let (p1, p2) = (nearest_on_ray(d, 0.5 * eta), nearest_on_ray(d, -0.5 * eta));
                vertex + if (p1 - d).norm_sq() <= (p2 - d).norm_sq() { p1 } else { p2 }
            }
            Domain::HalfPlane => Vec2::new(0.0, x.y),
            Domain::ParabolaLike { a, gamma } => nearest_on_curve(x, a, gamma),
        }
    }

    /// Boundary points within `radius` of `x` that maximise `(direction, ·)`.
    pub fn farthest_exit_along(&self, x: Vec2, radius: f64, direction: Vec2) -> Vec2 {
        let nearest = self.nearest_boundary_point(x);
        let mut best = nearest;
        let mut consider = |c: Vec2| {
            if (c - x).norm() <= radius && c.dot(direction) > best.dot(direction) {
                best = c;
            }
        };
        match *self {
            Domain::Wedge { eta, vertex } => {
                consider(vertex);
                for phi in [0.5 * eta, -0.5 * eta] {
                    let u = Vec2::from_polar(1.0, phi);
                    for t in chord(x - vertex, u, radius) {
                        consider(vertex + u * t);
                    }
                }
            }
            Domain::HalfPlane => {
                for t in chord(x, Vec2::E2, radius).into_iter().chain(chord(x, -Vec2::E2, radius)) {
                    consider(Vec2::E2 * t);
                }
            }
            Domain::ParabolaLike { .. } => {}
        }
        best
    }

    /// Whether `b` lies on the boundary, up to a relative tolerance.
    pub fn on_boundary(&self, b: Vec2) -> bool {
        let tol = 1e-9 * (1.0 + b.norm());
        match *self {
            Domain::Wedge { eta, vertex } => {
                let d = b - vertex;
                let r = d.norm();
                r <= tol || (d.angle().abs() - 0.5 * eta).abs() * r <= tol
            }
            Domain::HalfPlane => b.x.abs() <= tol,
            Domain::ParabolaLike { a, gamma } => {
                b.x >= -tol && (b.y.abs() - a * b.x.max(0.0).powf(gamma)).abs() <= tol * (1.0 + a)
            }
        }
    }
}

/// Nearest point to `d` on the ray from the origin at angle `phi`.
fn nearest_on_ray(d: Vec2, phi: f64) -> Vec2 {
    let u = Vec2::from_polar(1.0, phi);
    u * d.dot(u).max(0.0)
}

/// Parameters `t ≥ 0` where the ray `t u` meets the circle of radius `radius` about `d`.
fn chord(d: Vec2, u: Vec2, radius: f64) -> Vec<f64> {
    let b = d.dot(u);
    let disc = b * b - (d.norm_sq() - radius * radius);
    if disc < 0.0 {
        return Vec::new();
    }
    let s = disc.sqrt();
    [b - s, b + s].into_iter().filter(|&t| t >= 0.0).collect()
}

/// Nearest point on `|x₂| = A x₁^γ`, by a coarse scan followed by golden-section refinement.
fn nearest_on_curve(x: Vec2, a: f64, gamma: f64) -> Vec2 {
    let sign = if x.y >= 0.0 { 1.0 } else { -1.0 };
    let point = |t: f64| Vec2::new(t, sign * a * t.powf(gamma));
    let dist2 = |t: f64| (point(t) - x).norm_sq();
    let reach = x.norm() + 1.0;
    let (lo, hi) = ((x.x - reach).max(0.0), x.x + reach);
    let n = 256;
    let mut best = (lo, dist2(lo));
    for i in 1..=n {
        let t = lo + (hi - lo) * i as f64 / n as f64;
        let d = dist2(t);
        if d < best.1 {
            best = (t, d);
        }
    }
    let h = (hi - lo) / n as f64;
    let (mut l, mut r) = ((best.0 - h).max(0.0), best.0 + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let m1 = r - g * (r - l);
        let m2 = l + g * (r - l);
        if dist2(m1) <= dist2(m2) {
            r = m2;
        } else {
            l = m1;
        }
    }
    let t = 0.5 * (l + r);
    if dist2(0.0) < dist2(t) {
        Vec2::ZERO
    } else {
        point(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Player {
    I,
    II,
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Player::I => "I",
            Player::II => "II",
        })
    }
}

/// A user-supplied strategy.
pub trait CustomStrategy: Send + Sync {
    fn name(&self) -> String;

    /// The tug `v`, `|v| ≤ eps`.
    fn tug(&self, x: Vec2, eps: f64) -> Vec2;

    /// The exit point when the game is within `radius` of the boundary.
    fn exit(&self, x: Vec2, domain: &Domain, _radius: f64) -> Vec2 {
        domain.nearest_boundary_point(x)
    }
}

#[derive(Clone)]
pub enum Strategy {
    /// Tug ε along `−∇u`; exit at the nearest boundary point.
    PullNegGradU(Arc<PSolution>),
    /// Tug ε along `+∇u`; exit at the nearest boundary point.
    PullPosGradU(Arc<PSolution>),
    /// Tug ε along a fixed unit direction; exit at the reachable boundary point furthest
    /// along it.
    PullAxis(Vec2),
    /// Never tug; exit at the nearest boundary point.
    NullMove,
    Custom(Arc<dyn CustomStrategy>),
}

impl fmt::Debug for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl Strategy {
    pub fn pull_axis(direction: Vec2) -> Result<Self> {
        direction
            .normalized()
            .map(Strategy::PullAxis)
            .ok_or_else(|| Error::Domain("pull_axis needs a nonzero direction".into()))
    }

    pub fn name(&self) -> String {
        match self {
            Strategy::PullNegGradU(_) => "pull_neg_grad_u".into(),
            Strategy::PullPosGradU(_) => "pull_pos_grad_u".into(),
            // `+ 0.0` turns a negative zero into a plain zero.
            Strategy::PullAxis(d) => format!("pull_axis({},{})", d.x + 0.0, d.y + 0.0),
            Strategy::NullMove => "null_move".into(),
            Strategy::Custom(c) => c.name(),
        }
    }

    pub fn tug(&self, x: Vec2, eps: f64) -> Vec2 {
        match self {
            Strategy::PullNegGradU(u) => u.grad(x).normalized().map_or(Vec2::ZERO, |g| g * -eps),
            Strategy::PullPosGradU(u) => u.grad(x).normalized().map_or(Vec2::ZERO, |g| g * eps),
            Strategy::PullAxis(d) => *d * eps,
            Strategy::NullMove => Vec2::ZERO,
            Strategy::Custom(c) => c.tug(x, eps),
        }
    }

    pub fn exit(&self, x: Vec2, domain: &Domain, radius: f64) -> Vec2 {
        match self {
            Strategy::PullAxis(d) => domain.farthest_exit_along(x, radius, *d),
            Strategy::Custom(c) => c.exit(x, domain, radius),
            _ => domain.nearest_boundary_point(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameState {
    pub position: Vec2,
    pub step: u64,
    pub terminal: bool,
    pub exit_point: Option<Vec2>,
    /// Winner of the coin toss at the last step.
    pub mover: Option<Player>,
}

impl GameState {
    pub fn start(position: Vec2) -> Self {
        Self { position, step: 0, terminal: false, exit_point: None, mover: None }
    }
}

/// One turn of the game.
pub fn game_step<R: Rng + ?Sized>(
    state: &GameState,
    s1: &Strategy,
    s2: &Strategy,
    domain: &Domain,
    params: &GameParams,
    rng: &mut R,
) -> Result<GameState> {
    if state.terminal {
        return Err(Error::Domain("the game has already ended".into()));
    }
    let x = state.position;
    let (mover, strategy) = if rng.gen::<bool>() { (Player::I, s1) } else { (Player::II, s2) };
    let reach = params.alpha * params.eps;
    if domain.dist_to_boundary(x) > reach * (1.0 + MOVE_SLACK) {
        let v = strategy.tug(x, params.eps);
        if !(v.norm() <= params.eps * (1.0 + MOVE_SLACK)) {
            return Err(Error::StrategyViolation(format!(
                "{} moved {} > eps = {}",
                strategy.name(),
                v.norm(),
                params.eps
            )));
        }
        let z = sample_noise(v, params, rng);
        Ok(GameState {
            position: x + v + z,
            step: state.step + 1,
            terminal: false,
            exit_point: None,
            mover: Some(mover),
        })
    } else {
        let b = strategy.exit(x, domain, reach);
        if !((b - x).norm() <= reach * (1.0 + MOVE_SLACK)) || !domain.on_boundary(b) {
            return Err(Error::StrategyViolation(format!(
                "{} chose exit ({}, {}) which is not a boundary point within {reach}",
                strategy.name(),
                b.x,
                b.y
            )));
        }
        Ok(GameState { position: b, step: state.step + 1, terminal: true, exit_point: Some(b), mover: Some(mover) })
    }
}

/// Result of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub steps: u64,
    /// True if the game was still running after `max_steps`.
    pub censored: bool,
    pub exit_point: Option<Vec2>,
}

/// Play until the game ends or `max_steps` turns have been taken.
pub fn play<R: Rng + ?Sized>(
    start: Vec2,
    s1: &Strategy,
    s2: &Strategy,
    domain: &Domain,
    params: &GameParams,
    max_steps: u64,
    rng: &mut R,
) -> Result<Outcome> {
    let mut state = GameState::start(start);
    while state.step < max_steps {
        state = game_step(&state, s1, s2, domain, params, rng)?;
        if state.terminal {
            return Ok(Outcome { steps: state.step, censored: false, exit_point: state.exit_point });
        }
    }
    Ok(Outcome { steps: state.step, censored: true, exit_point: None })
}

/// Like [`play`], keeping every visited state.
pub fn play_logged<R: Rng + ?Sized>(
    start: Vec2,
    s1: &Strategy,
    s2: &Strategy,
    domain: &Domain,
    params: &GameParams,
    max_steps: u64,
    rng: &mut R,
) -> Result<Vec<GameState>> {
    let mut states = vec![GameState::start(start)];
    while states.len() as u64 <= max_steps {
        let next = game_step(states.last().expect("nonempty"), s1, s2, domain, params, rng)?;
        let done = next.terminal;
        states.push(next);
        if done {
            break;
        }
    }
    Ok(states)
}

/// Trajectory dump with header `step,x,y,mover,terminal`.
pub fn trajectory_csv(states: &[GameState]) -> String {
    let mut out = String::from("step,x,y,mover,terminal\n");
    for s in states {
        let mover = s.mover.map(|m| m.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{:.17e},{:.17e},{},{}\n", s.step, s.position.x, s.position.y, mover, s.terminal));
    }
    out
}

/// Constants of the supermartingale `M_k = u(x_k) + (β/2)ε²k − C₁kε³`, estimated by sampling
/// the working wedge near its vertex, where all the ratios involved peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupermartingaleConstants {
    pub grad_inf: f64,
    pub hess_sup: f64,
    /// Sup of `|D³u|`, i.e. of `|4f' + f'''| / r`.
    pub third_sup: f64,
    /// Sup of `‖D²u‖² / |∇u|²`.
    pub hess_ratio_sup: f64,
    /// Sup of `8‖B‖² / |∇u|` with `A = ½ D²u`.
    pub b_ratio_sup: f64,
    /// Taylor remainder constant over balls of radius `2(α+1)ε`.
    pub taylor: f64,
    /// `C₁ = C + 18β² sup ‖D²u‖²/|∇u|²`, times the safety factor.
    pub c1: f64,
    /// `C + sup 8‖B‖²/|∇u|` with the remainder taken over single steps (radius αε),
    /// times the safety factor. This is the quantity the one-step estimate actually needs.
    pub c1_sharp: f64,
    pub safety: f64,
    pub samples: usize,
}

pub fn supermartingale_constants(u: &PSolution, params: &GameParams) -> Result<SupermartingaleConstants> {
    let safety = 2.0;
    let r_max = 20.0 * (u.translation().norm() + 1.0);
    let pts = u.sample_points(r_max, 400, 61);
    let (mut grad_inf, mut hess_sup, mut third_sup, mut hess_ratio_sup, mut b_ratio_sup) =
        (f64::INFINITY, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &x in &pts {
        let jet = u.eval_u(x)?;
        let g = jet.grad.norm();
        let h = jet.hess.op_norm();
        let b = params.b_matrix(jet.hess.scale(0.5)).op_norm();
        grad_inf = grad_inf.min(g);
        hess_sup = hess_sup.max(h);
        third_sup = third_sup.max(u.third_derivative(x).abs());
        hess_ratio_sup = hess_ratio_sup.max(h * h / (g * g));
        b_ratio_sup = b_ratio_sup.max(8.0 * b * b / g);
    }
    if !(grad_inf > 0.0) {
        return Err(Error::CriticalPoint(grad_inf));
    }
    let gamma = 2.0 * (params.alpha + 1.0);
    let taylor = gamma.powi(3) / 6.0 * third_sup;
    let taylor_step = params.alpha.powi(3) / 6.0 * third_sup;
    let beta = params.beta;
    Ok(SupermartingaleConstants {
        grad_inf,
        hess_sup,
        third_sup,
        hess_ratio_sup,
        b_ratio_sup,
        taylor,
        c1: safety * (taylor + 18.0 * beta * beta * hess_ratio_sup),
        c1_sharp: safety * (taylor_step + b_ratio_sup),
        safety,
        samples: pts.len(),
    })
}
