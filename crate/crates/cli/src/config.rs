//! The `simulate` configuration file.
//!
//! ```toml
//! [domain]
//! kind = "wedge"            # wedge | half_plane | parabola_like
//! eta = [0.7853981633974483] # full apertures, wedge only
//! # a = 1.0, gamma = 0.5     # parabola_like only
//!
//! [game]
//! p = [2.0]
//! eps = [0.1, 0.05, 0.025]
//! start = [1.0, 0.0]        # relative to the vertex for wedges
//!
//! [run]
//! n_traj = 1000
//! seed = 1
//! horizon = 4.0             # or max_steps = 100000; default horizon 1e5
//!
//! [[pair]]
//! I = "pull_pos_grad_u"
//! II = "pull_neg_grad_u"
//!
//! [output]
//! csv = "sweep.csv"         # optional, overridden by --out
//! ```

use std::ops::Range;
use std::path::PathBuf;

use serde::Deserialize;
use toml::Spanned;
use tugwedge::montecarlo::{DomainKind, MaxSteps, StrategySpec, SweepSpec};
use tugwedge::Vec2;

use crate::error::{CliError, CliResult};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub domain: DomainSection,
    pub game: GameSection,
    pub run: RunSection,
    #[serde(rename = "pair")]
    pub pairs: Spanned<Vec<PairSection>>,
    pub output: Option<OutputSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub kind: Spanned<String>,
    pub eta: Option<Spanned<Vec<f64>>>,
    pub a: Option<f64>,
    pub gamma: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    pub p: Spanned<Vec<f64>>,
    pub eps: Spanned<Vec<f64>>,
    pub start: Spanned<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub n_traj: Spanned<usize>,
    pub seed: u64,
    pub max_steps: Option<Spanned<u64>>,
    pub horizon: Option<Spanned<f64>>,
    pub profile_nodes: Option<usize>,
    pub enlargement: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSection {
    #[serde(rename = "I")]
    pub first: Spanned<String>,
    #[serde(rename = "II")]
    pub second: Spanned<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub csv: Option<PathBuf>,
}

/// Parse and validate a configuration; errors carry the line they refer to.
pub fn parse(text: &str) -> CliResult<(SweepSpec, Option<PathBuf>)> {
    let cfg: SimulateConfig = toml::from_str(text).map_err(|e| CliError::Usage(format!("config schema error: {e}")))?;
    let fail = |span: Range<usize>, msg: String| {
        CliError::Usage(format!("config error at line {}: {msg}", line_of(text, span.start)))
    };

    let kind = match cfg.domain.kind.get_ref().as_str() {
        "wedge" => DomainKind::Wedge,
        "half_plane" => DomainKind::HalfPlane,
        "parabola_like" => match (cfg.domain.a, cfg.domain.gamma) {
            (Some(a), Some(gamma)) => DomainKind::ParabolaLike { a, gamma },
            _ => return Err(fail(cfg.domain.kind.span(), "parabola_like needs `a` and `gamma`".into())),
        },
        other => {
            return Err(fail(
                cfg.domain.kind.span(),
                format!("unknown domain kind `{other}` (expected wedge, half_plane or parabola_like)"),
            ))
        }
    };
    let etas = match (&cfg.domain.eta, kind) {
        (Some(eta), DomainKind::Wedge) => {
            if eta.get_ref().is_empty() || eta.get_ref().iter().any(|&e| !(e > 0.0)) {
                return Err(fail(eta.span(), "`eta` must be a nonempty list of positive apertures".into()));
            }
            eta.get_ref().clone()
        }
        (None, DomainKind::Wedge) => return Err(fail(cfg.domain.kind.span(), "wedge domains need `eta`".into())),
        (Some(eta), _) => return Err(fail(eta.span(), "`eta` only applies to wedge domains".into())),
        (None, _) => Vec::new(),
    };
    let ps = cfg.game.p.get_ref();
    if ps.is_empty() || ps.iter().any(|&p| !(p > 1.0)) {
        return Err(fail(cfg.game.p.span(), "`p` must be a nonempty list of values > 1".into()));
    }
    let eps = cfg.game.eps.get_ref();
    if eps.is_empty() || eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(fail(cfg.game.eps.span(), "`eps` must be a nonempty list of values in (0, 1)".into()));
    }
    let [sx, sy] = *cfg.game.start.get_ref();
    if !(sx.is_finite() && sy.is_finite()) {
        return Err(fail(cfg.game.start.span(), "`start` must be finite".into()));
    }
    if *cfg.run.n_traj.get_ref() == 0 {
        return Err(fail(cfg.run.n_traj.span(), "`n_traj` must be at least 1".into()));
    }
    let max_steps = match (&cfg.run.max_steps, &cfg.run.horizon) {
        (Some(m), None) if *m.get_ref() > 0 => MaxSteps::Fixed(*m.get_ref()),
        (Some(m), None) => return Err(fail(m.span(), "`max_steps` must be at least 1".into())),
        (None, Some(h)) if *h.get_ref() > 0.0 => MaxSteps::Horizon(*h.get_ref()),
        (None, Some(h)) => return Err(fail(h.span(), "`horizon` must be positive".into())),
        (None, None) => MaxSteps::default(),
        (Some(m), Some(_)) => return Err(fail(m.span(), "give either `max_steps` or `horizon`, not both".into())),
    };
    if cfg.pairs.get_ref().is_empty() {
        return Err(fail(cfg.pairs.span(), "at least one [[pair]] is required".into()));
    }
    let mut pairs = Vec::new();
    for pair in cfg.pairs.get_ref() {
        let strategy =
            |s: &Spanned<String>| StrategySpec::parse(s.get_ref()).map_err(|e| fail(s.span(), e.to_string()));
        pairs.push((strategy(&pair.first)?, strategy(&pair.second)?));
    }

    let mut spec = SweepSpec::new(kind, Vec2::new(sx, sy), *cfg.run.n_traj.get_ref(), cfg.run.seed);
    spec.eps = eps.clone();
    spec.etas = etas;
    spec.ps = ps.clone();
    spec.pairs = pairs;
    spec.max_steps = max_steps;
    if let Some(n) = cfg.run.profile_nodes {
        spec.profile_nodes = n;
    }
    if let Some(e) = cfg.run.enlargement {
        spec.enlargement = e;
    }
    Ok((spec, cfg.output.and_then(|o| o.csv)))
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}
