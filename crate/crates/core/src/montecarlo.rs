//! Exit-time estimates, parameter sweeps and one-step martingale diagnostics.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::game::{self, Domain, GameParams, GameState, Strategy};
use crate::geom::Vec2;
use crate::psolution::{PSolution, DEFAULT_ENLARGEMENT};
use crate::rng::{mix, stream};

/// Default censoring horizon in physical time `ε² · steps`: 10⁷ steps at `ε = 0.1`.
pub const DEFAULT_HORIZON: f64 = 1e5;

/// Below this many trajectories the confidence interval uses Student's t.
const STUDENT_BELOW: usize = 30;

/// Salt separating the probe-state streams from the trajectory streams.
const PROBE_SALT: u64 = 0x5052_4f42_4553;

/// `⌈T / ε²⌉`, the step budget for physical horizon `T`.
pub fn steps_for_horizon(horizon: f64, eps: f64) -> u64 {
    (horizon / (eps * eps)).ceil().max(1.0) as u64
}

pub fn default_max_steps(eps: f64) -> u64 {
    steps_for_horizon(DEFAULT_HORIZON, eps)
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub params: GameParams,
    pub domain: Domain,
    pub s1: Strategy,
    pub s2: Strategy,
    pub start: Vec2,
    pub n_traj: usize,
    pub max_steps: u64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.domain.contains(self.start) {
            return Err(Error::Config(format!("start ({}, {}) is not inside the domain", self.start.x, self.start.y)));
        }
        if self.n_traj == 0 {
            return Err(Error::Config("n_traj must be at least 1".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitTimeEstimate {
    /// Mean of `τ ∧ max_steps`; a lower bound for `E[τ]` when anything is censored.
    pub mean_tau: f64,
    /// Mean over uncensored trajectories only (NaN if all are censored).
    pub mean_tau_uncensored: f64,
    /// `ε² · mean_tau`.
    pub scaled: f64,
    /// Half-width of the 95% interval for `mean_tau`.
    pub ci95: f64,
    pub censored_fraction: f64,
    pub n_traj: usize,
    pub eps: f64,
}

impl ExitTimeEstimate {
    pub fn all_censored(&self) -> bool {
        self.censored_fraction == 1.0
    }

    /// Half-width of the 95% interval for `scaled`.
    pub fn scaled_ci95(&self) -> f64 {
        self.eps * self.eps * self.ci95
    }
}

/// Pairwise summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (l, r) = xs.split_at(xs.len() / 2);
    pairwise_sum(l) + pairwise_sum(r)
}

/// Sample mean and 95% half-width (normal quantile, Student's t for small samples).
pub fn mean_ci95(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::INFINITY);
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n == 1 {
        return (mean, f64::INFINITY);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let se = (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt();
    let z = if n < STUDENT_BELOW {
        StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid dof").inverse_cdf(0.975)
    } else {
        1.959963984540054
    };
    (mean, z * se)
}

/// Exit steps of every trajectory, with a censoring flag, in trajectory order.
pub fn exit_times(cfg: &SimConfig) -> Result<Vec<(u64, bool)>> {
    cfg.validate()?;
    (0..cfg.n_traj as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(cfg.seed, i);
            let o = game::play(cfg.start, &cfg.s1, &cfg.s2, &cfg.domain, &cfg.params, cfg.max_steps, &mut rng)?;
            Ok((o.steps, o.censored))
        })
        .collect()
}

pub fn estimate_exit_time(cfg: &SimConfig) -> Result<ExitTimeEstimate> {
    let runs = exit_times(cfg)?;
    let taus: Vec<f64> = runs.iter().map(|&(t, _)| t as f64).collect();
    let done: Vec<f64> = runs.iter().filter(|r| !r.1).map(|&(t, _)| t as f64).collect();
    let (mean_tau, ci95) = mean_ci95(&taus);
    let mean_tau_uncensored = if done.is_empty() { f64::NAN } else { pairwise_sum(&done) / done.len() as f64 };
    let eps = cfg.params.eps;
    Ok(ExitTimeEstimate {
        mean_tau,
        mean_tau_uncensored,
        scaled: eps * eps * mean_tau,
        ci95,
        censored_fraction: (runs.len() - done.len()) as f64 / runs.len() as f64,
        n_traj: runs.len(),
        eps,
    })
}

/// A strategy before it is bound to a solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrategySpec {
    PullNegGradU,
    PullPosGradU,
    PullAxis(Vec2),
    NullMove,
}

impl StrategySpec {
    /// Parse `pull_neg_grad_u`, `pull_pos_grad_u`, `null_move` or `pull_axis(x,y)`.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        match t {
            "pull_neg_grad_u" => return Ok(StrategySpec::PullNegGradU),
            "pull_pos_grad_u" => return Ok(StrategySpec::PullPosGradU),
            "null_move" => return Ok(StrategySpec::NullMove),
            _ => {}
        }
        let inner = t
            .strip_prefix("pull_axis(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::Config(format!("unknown strategy `{t}`")))?;
        let parts: Vec<&str> = inner.split(',').collect();
        let parse = |x: &str| x.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad direction in `{t}`")));
        if parts.len() != 2 {
            return Err(Error::Config(format!("pull_axis needs two components in `{t}`")));
        }
        let d = Vec2::new(parse(parts[0])?, parse(parts[1])?);
        d.normalized()
            .map(StrategySpec::PullAxis)
            .ok_or_else(|| Error::Config(format!("pull_axis direction in `{t}` is zero")))
    }

    pub fn needs_solution(&self) -> bool {
        matches!(self, StrategySpec::PullNegGradU | StrategySpec::PullPosGradU)
    }

    pub fn bind(&self, u: Option<&Arc<PSolution>>) -> Result<Strategy> {
        let need = || {
            u.cloned()
                .ok_or_else(|| Error::Config("gradient strategies need a wedge below the critical aperture".into()))
        };
        Ok(match *self {
            StrategySpec::PullNegGradU => Strategy::PullNegGradU(need()?),
            StrategySpec::PullPosGradU => Strategy::PullPosGradU(need()?),
            StrategySpec::PullAxis(d) => Strategy::PullAxis(d),
            StrategySpec::NullMove => Strategy::NullMove,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainKind {
    Wedge,
    HalfPlane,
    ParabolaLike { a: f64, gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaxSteps {
    Fixed(u64),
    /// Constant physical horizon `ε² · steps`.
    Horizon(f64),
}

impl Default for MaxSteps {
    fn default() -> Self {
        MaxSteps::Horizon(DEFAULT_HORIZON)
    }
}

impl MaxSteps {
    pub fn steps(&self, eps: f64) -> u64 {
        match *self {
            MaxSteps::Fixed(n) => n,
            MaxSteps::Horizon(t) => steps_for_horizon(t, eps),
        }
    }
}

/// A grid of cells `ε × η × p × (strategy I, strategy II)`.
///
/// For wedges the game is played on `W_η` translated to the vertex `2(α + 1) e₁` of the
/// solution built for the cell, and `start` is given relative to that vertex. For the other
/// domains `start` is absolute and `etas` must be empty; the row reports `η = π` for the
/// half-plane and NaN otherwise.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub domain: DomainKind,
    pub eps: Vec<f64>,
    pub etas: Vec<f64>,
    pub ps: Vec<f64>,
    pub pairs: Vec<(StrategySpec, StrategySpec)>,
    pub start: Vec2,
    pub n_traj: usize,
    pub max_steps: MaxSteps,
    pub seed: u64,
    pub enlargement: f64,
    pub profile_nodes: usize,
}

impl SweepSpec {
    /// An empty grid on `domain` with default solution settings.
    pub fn new(domain: DomainKind, start: Vec2, n_traj: usize, seed: u64) -> Self {
        Self {
            domain,
            eps: Vec::new(),
            etas: Vec::new(),
            ps: Vec::new(),
            pairs: Vec::new(),
            start,
            n_traj,
            max_steps: MaxSteps::default(),
            seed,
            enlargement: DEFAULT_ENLARGEMENT,
            profile_nodes: crate::profile::DEFAULT_NODES,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub eps: f64,
    pub eta: f64,
    pub p: f64,
    pub strategy_i: String,
    pub strategy_ii: String,
    pub seed: u64,
    pub estimate: ExitTimeEstimate,
}

/// Expanded cells in row order, each with its own config.
pub fn sweep_cells(spec: &SweepSpec) -> Result<Vec<(SweepRow, SimConfig)>> {
    if spec.eps.is_empty() || spec.ps.is_empty() || spec.pairs.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    let etas: Vec<f64> = match spec.domain {
        DomainKind::Wedge => {
            if spec.etas.is_empty() {
                return Err(Error::Config("wedge sweep needs at least one eta".into()));
            }
            spec.etas.clone()
        }
        DomainKind::HalfPlane | DomainKind::ParabolaLike { .. } => {
            if !spec.etas.is_empty() {
                return Err(Error::Config("eta only applies to wedge sweeps".into()));
            }
            vec![if spec.domain == DomainKind::HalfPlane { PI } else { f64::NAN }]
        }
    };
    let needs_u = spec.pairs.iter().any(|(a, b)| a.needs_solution() || b.needs_solution());
    let mut solutions: HashMap<(u64, u64), Arc<PSolution>> = HashMap::new();
    let mut cells = Vec::new();
    for &eps in &spec.eps {
        for &eta in &etas {
            for &p in &spec.ps {
                let base = GameParams::canonical(p, eps, spec.seed)?;
                let u = if needs_u || spec.domain == DomainKind::Wedge {
                    if spec.domain != DomainKind::Wedge {
                        return Err(Error::Config("gradient strategies need a wedge domain".into()));
                    }
                    let key = (eta.to_bits(), p.to_bits());
                    if let Entry::Vacant(slot) = solutions.entry(key) {
                        let sol = PSolution::for_game_wedge(eta, p, base.alpha, spec.enlargement, spec.profile_nodes)?;
                        slot.insert(Arc::new(sol));
                    }
                    solutions.get(&key).cloned()
                } else {
                    None
                };
                let (domain, offset) = match spec.domain {
                    DomainKind::Wedge => {
                        let vertex = u.as_ref().expect("wedge solution").translation();
                        (Domain::wedge(eta, vertex)?, vertex)
                    }
                    DomainKind::HalfPlane => (Domain::HalfPlane, Vec2::ZERO),
                    DomainKind::ParabolaLike { a, gamma } => (Domain::parabola_like(a, gamma)?, Vec2::ZERO),
                };
                for (s1, s2) in &spec.pairs {
                    let index = cells.len() as u64;
                    let seed = mix(spec.seed, index);
                    let params = GameParams { seed, ..base };
                    let cfg = SimConfig {
                        params,
                        domain,
                        s1: s1.bind(u.as_ref())?,
                        s2: s2.bind(u.as_ref())?,
                        start: offset + spec.start,
                        n_traj: spec.n_traj,
                        max_steps: spec.max_steps.steps(eps),
                        seed,
                    };
                    cfg.validate()?;
                    let row = SweepRow {
                        eps,
                        eta,
                        p,
                        strategy_i: cfg.s1.name(),
                        strategy_ii: cfg.s2.name(),
                        seed,
                        estimate: placeholder(eps),
                    };
                    cells.push((row, cfg));
                }
            }
        }
    }
    Ok(cells)
}

fn placeholder(eps: f64) -> ExitTimeEstimate {
    ExitTimeEstimate {
        mean_tau: f64::NAN,
        mean_tau_uncensored: f64::NAN,
        scaled: f64::NAN,
        ci95: f64::NAN,
        censored_fraction: f64::NAN,
        n_traj: 0,
        eps,
    }
}

/// Run every cell of the grid. Each cell is seeded from `(seed, cell index)`.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    sweep_cells(spec)?
        .into_iter()
        .map(|(mut row, cfg)| {
            row.estimate = estimate_exit_time(&cfg)?;
            Ok(row)
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: &str =
    "eps,eta,p,strategy_I,strategy_II,n_traj,mean_tau,scaled,ci95,censored_fraction,seed";

/// CSV with full-precision numbers. Strategy names are quoted since `pull_axis(x,y)` has a comma.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let e = &r.estimate;
        out.push_str(&format!(
            "{:e},{:e},{:e},\"{}\",\"{}\",{},{:.17e},{:.17e},{:.17e},{:.17e},{}\n",
            r.eps,
            r.eta,
            r.p,
            r.strategy_i,
            r.strategy_ii,
            e.n_traj,
            e.mean_tau,
            e.scaled,
            e.ci95,
            e.censored_fraction,
            r.seed
        ));
    }
    out
}

/// The sign prediction tested by [`martingale_diagnostic`].
#[derive(Debug, Clone)]
pub enum Process {
    /// `M_k = u(x_k) + (β/2)ε²k − C₁kε³` should not increase on average.
    Supermartingale { u: Arc<PSolution>, c1: f64 },
    /// `(d, x_k)` should not decrease on average.
    Submartingale { direction: Vec2 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub position: Vec2,
    pub mean: f64,
    pub stderr: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticReport {
    pub probes: Vec<ProbeResult>,
    pub violations: usize,
    pub violation_fraction: f64,
    /// Fraction of probes whose mean is within 3σ of zero.
    pub null_fraction: f64,
}

/// Conditional one-step increments of the process at `n_probe` states visited by the game,
/// each estimated from `samples` independent steps. Only states more than `αε` from the
/// boundary are probed: the bound concerns interior turns, while the final boundary move
/// stops the process.
pub fn martingale_diagnostic(
    cfg: &SimConfig,
    process: &Process,
    n_probe: usize,
    samples: usize,
) -> Result<DiagnosticReport> {
    cfg.validate()?;
    if n_probe == 0 || samples < 2 {
        return Err(Error::Config("need at least one probe and two samples per probe".into()));
    }
    let states = probe_states(cfg, n_probe)?;
    let params = &cfg.params;
    let eps = params.eps;
    let probes: Vec<ProbeResult> = states
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let mut rng = stream(mix(cfg.seed, PROBE_SALT + 1), i as u64);
            let start = GameState::start(x);
            let mut incs = Vec::with_capacity(samples);
            for _ in 0..samples {
                let next = game::game_step(&start, &cfg.s1, &cfg.s2, &cfg.domain, params, &mut rng)?;
                let d = match process {
                    Process::Supermartingale { u, c1 } => {
                        u.u(next.position) - u.u(x) + 0.5 * params.beta * eps * eps - c1 * eps.powi(3)
                    }
                    Process::Submartingale { direction } => direction.dot(next.position - x),
                };
                incs.push(d);
            }
            let (mean, half) = mean_ci95(&incs);
            let stderr = half / 1.959963984540054;
            let violated = match process {
                Process::Supermartingale { .. } => mean - 3.0 * stderr > 0.0,
                Process::Submartingale { .. } => mean + 3.0 * stderr < 0.0,
            };
            Ok(ProbeResult { position: x, mean, stderr, violated })
        })
        .collect::<Result<_>>()?;
    let violations = probes.iter().filter(|p| p.violated).count();
    let null = probes.iter().filter(|p| p.mean.abs() <= 3.0 * p.stderr).count();
    let n = probes.len() as f64;
    Ok(DiagnosticReport {
        violation_fraction: violations as f64 / n,
        null_fraction: null as f64 / n,
        violations,
        probes,
    })
}

/// Interior states visited by game trajectories from `cfg.start`, thinned so that probes
/// are spread along each path.
fn probe_states(cfg: &SimConfig, n_probe: usize) -> Result<Vec<Vec2>> {
    let reach = cfg.params.alpha * cfg.params.eps;
    let stride = ((0.05 / (cfg.params.eps * cfg.params.eps)).ceil() as usize).max(1);
    let per_path = 20;
    let mut out = Vec::with_capacity(n_probe);
    let mut path = 0u64;
    while out.len() < n_probe {
        if path > 100 * n_probe as u64 {
            return Err(Error::NonConvergence("could not collect interior probe states".into()));
        }
        let mut rng = stream(mix(cfg.seed, PROBE_SALT), path);
        path += 1;
        let steps = cfg.max_steps.min((stride * per_path) as u64);
        let states = game::play_logged(cfg.start, &cfg.s1, &cfg.s2, &cfg.domain, &cfg.params, steps, &mut rng)?;
        for s in states.iter().step_by(stride) {
            if !s.terminal && cfg.domain.dist_to_boundary(s.position) > reach && out.len() < n_probe {
                out.push(s.position);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 5050.0);
    }

    #[test]
    fn small_samples_use_student() {
        let (m, h) = mean_ci95(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        // t_{0.975, 2} = 4.302652729911275, standard error 1/√3.
        assert_relative_eq!(h, 4.302652729911275 / 3f64.sqrt(), max_relative = 1e-9);
    }

    #[test]
    fn strategy_names_round_trip() {
        for name in ["pull_neg_grad_u", "pull_pos_grad_u", "null_move", "pull_axis(1,0)", "pull_axis(0,-1)"] {
            let spec = StrategySpec::parse(name).unwrap();
            assert_eq!(spec.bind(None).map(|s| s.name()).unwrap_or_else(|_| name.into()), name);
        }
        assert!(StrategySpec::parse("pull_axis(0,0)").is_err());
        assert!(StrategySpec::parse("wander").is_err());
    }

    #[test]
    fn horizon_scaling() {
        assert_eq!(default_max_steps(0.1), 10_000_000);
        assert_eq!(default_max_steps(0.05), 40_000_000);
    }
}
