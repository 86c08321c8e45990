use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::Serialize;
use tugwedge::profile::{self, AngularProfile, ProfileNode};
use tugwedge::psolution::{deltap_quadratic, game_p_laplacian_fd, PSolution, QuadraticForm, FD_RELATIVE_STEP};
use tugwedge::wedge_ode::{self, OdeConfig};
use tugwedge::{montecarlo, Sym2, Vec2};

use crate::config;
use crate::error::{CliError, CliResult};
use crate::Field;

/// Allowed gap between the K-route and the closed form; the route is limited by `y_min`.
const K_ROUTE_TOL: f64 = 1e-4;

/// Residual tolerance for `verify`.
const VERIFY_TOL: f64 = 1e-4;

/// `solve` fails if the residual relative to [`residual_scale`] exceeds this.
const SOLVE_RESIDUAL_TOL: f64 = 1e-6;

/// Interpolated points per grid interval at which `solve` checks the profile equation.
const RESIDUAL_EXTRA_POINTS: usize = 4;

/// Calibration tolerance on the half-aperture.
const CALIBRATION_TOL: f64 = 1e-10;

pub const PROFILE_HEADER: &str = "theta,y,yp,ypp";

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn read_file(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Serialize)]
struct CriticalAngleReport {
    p: f64,
    half_angle_closed: f64,
    half_angle_quadrature: f64,
    half_angle_k_route: f64,
    full_angle_closed: f64,
    quadrature_discrepancy: f64,
    k_route_discrepancy: f64,
    tol: f64,
    k_route_tol: f64,
    within_tolerance: bool,
}

pub fn critical_angle(p: f64, tol: f64, json: bool) -> CliResult<()> {
    if !(p > 1.0) {
        return Err(CliError::Usage(format!("p = {p} must exceed 1")));
    }
    if !(tol > 0.0) {
        return Err(CliError::Usage(format!("tol = {tol} must be positive")));
    }
    let r = wedge_ode::critical_angle(p, tol)?;
    let k = wedge_ode::k_route_half_angle(p, &OdeConfig::default())?;
    let k_gap = (k - r.half_angle_closed).abs();
    let report = CriticalAngleReport {
        p,
        half_angle_closed: r.half_angle_closed,
        half_angle_quadrature: r.half_angle_quadrature,
        half_angle_k_route: k,
        full_angle_closed: 2.0 * r.half_angle_closed,
        quadrature_discrepancy: r.discrepancy,
        k_route_discrepancy: k_gap,
        tol,
        k_route_tol: K_ROUTE_TOL,
        within_tolerance: r.discrepancy <= tol && k_gap <= K_ROUTE_TOL,
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("plain struct"));
    } else {
        println!("{:<26}{p}", "p");
        println!("{:<26}{:.16e}", "half angle (closed)", report.half_angle_closed);
        println!("{:<26}{:.16e}  diff {:.3e}", "half angle (quadrature)", report.half_angle_quadrature, r.discrepancy);
        println!("{:<26}{:.16e}  diff {:.3e}", "half angle (K-route)", k, k_gap);
        println!("{:<26}{:.16e}", "full angle (closed)", report.full_angle_closed);
    }
    if !report.within_tolerance {
        return Err(CliError::Tolerance(format!(
            "routes disagree: quadrature {:.3e} (tol {tol:e}), K-route {k_gap:.3e} (tol {K_ROUTE_TOL:e})",
            r.discrepancy
        )));
    }
    Ok(())
}

/// Profile CSV: `# key = value` metadata lines followed by `theta,y,yp,ypp` rows on `[0, θ_a]`.
pub fn profile_csv(profile: &AngularProfile, meta: &[(&str, f64)]) -> String {
    let mut out = String::new();
    for (k, v) in meta {
        out.push_str(&format!("# {k} = {v:.16e}\n"));
    }
    out.push_str(PROFILE_HEADER);
    out.push('\n');
    for n in profile.grid() {
        out.push_str(&format!("{:.16e},{:.16e},{:.16e},{:.16e}\n", n.theta, n.y, n.yp, n.ypp));
    }
    out
}

pub struct ProfileFile {
    pub meta: BTreeMap<String, f64>,
    pub nodes: Vec<ProfileNode>,
}

pub fn read_profile(path: &Path) -> CliResult<ProfileFile> {
    let text = read_file(path)?;
    let bad = |msg: String| CliError::io(path, format!("malformed profile: {msg}"));
    let mut meta = BTreeMap::new();
    for line in text.lines().filter_map(|l| l.strip_prefix('#')) {
        let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("metadata line `#{line}`")))?;
        let v: f64 = v.trim().parse().map_err(|_| bad(format!("metadata value in `#{line}`")))?;
        meta.insert(k.trim().to_string(), v);
    }
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.iter().collect::<Vec<_>>().join(",");
    if header != PROFILE_HEADER {
        return Err(bad(format!("header `{header}`, expected `{PROFILE_HEADER}`")));
    }
    let mut nodes = Vec::new();
    for record in reader.deserialize::<(f64, f64, f64, f64)>() {
        let (theta, y, yp, ypp) = record.map_err(|e| bad(e.to_string()))?;
        nodes.push(ProfileNode { theta, y, yp, ypp });
    }
    Ok(ProfileFile { meta, nodes })
}

pub fn solve(p: f64, eta: f64, nodes: usize, out: &Path) -> CliResult<()> {
    if !(p > 1.0) {
        return Err(CliError::Usage(format!("p = {p} must exceed 1")));
    }
    let critical = 2.0 * wedge_ode::critical_half_angle_closed(p);
    if !(eta > 0.0 && eta < critical) {
        return Err(CliError::Usage(format!(
            "eta = {eta} is out of range: the critical full angle for p = {p} is {critical}"
        )));
    }
    if nodes < 2 {
        return Err(CliError::Usage("--nodes must be at least 2".into()));
    }
    let a = profile::calibrate_a(0.5 * eta, p, CALIBRATION_TOL)?;
    let prof = profile::build_profile(a, p, nodes)?;
    let residual = prof.max_residual(RESIDUAL_EXTRA_POINTS);
    let relative = residual / residual_scale(&prof);
    let meta = [
        ("p", p),
        ("a", a),
        ("eta", eta),
        ("theta_a", prof.theta_a()),
        ("critical_full_angle", critical),
        ("max_residual", residual),
        ("relative_residual", relative),
    ];
    write_file(out, &profile_csv(&prof, &meta))?;
    println!("a            {a:.16e}");
    println!("theta_a      {:.16e}", prof.theta_a());
    println!("max residual {residual:.3e} (relative {relative:.3e})");
    if relative > SOLVE_RESIDUAL_TOL {
        return Err(CliError::Tolerance(format!(
            "relative profile residual {relative:e} exceeds {SOLVE_RESIDUAL_TOL:e}; try a different --nodes"
        )));
    }
    Ok(())
}

/// Size of the profile equation's terms: the largest sum of their absolute values over the
/// grid. At a solution the terms cancel, so this is what the residual is measured against.
fn residual_scale(prof: &AngularProfile) -> f64 {
    let p = prof.p();
    prof.grid()
        .iter()
        .map(|n| {
            let (y, ypp) = (n.y.abs(), n.ypp.abs());
            4.0 * y * y * (1.0 + 2.0 * y + ypp / p)
                + n.yp * n.yp * (1.0 + 2.0 * (3.0 * p - 4.0).abs() * y / p + (p - 1.0) * ypp / p)
        })
        .fold(f64::MIN_POSITIVE, f64::max)
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    field: &'static str,
    max_abs_residual: f64,
    points: usize,
    h_policy: String,
    seed: u64,
    p: f64,
    a: f64,
    theta_a: f64,
    tol: f64,
}

pub fn verify(path: &Path, points: usize, seed: u64, field: Field, out: Option<&Path>) -> CliResult<()> {
    if points == 0 {
        return Err(CliError::Usage("--points must be at least 1".into()));
    }
    let file = read_profile(path)?;
    let get = |k: &str| {
        file.meta.get(k).copied().ok_or_else(|| CliError::io(path, format!("malformed profile: missing `# {k} =`")))
    };
    let (p, a) = (get("p")?, get("a")?);
    let prof = AngularProfile::from_grid(a, p, file.nodes).map_err(|e| CliError::io(path, e))?;
    let u = PSolution::new(prof);
    let theta_a = u.solution_half_angle();
    let mut rng = tugwedge::rng::stream(seed, 0);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let x = Vec2::from_polar(10f64.powf(rng.gen_range(-1.0..1.0)), theta_a * rng.gen_range(-0.9..0.9));
        let h = u.fd_step(x);
        let residual = match field {
            Field::U => u.deltap_fd(x)? + 1.0,
            Field::Linear => {
                let xi = Vec2::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU));
                game_p_laplacian_fd(|y| xi.dot(y), x, h, p)?
            }
            Field::Quadratic => {
                let m = Sym2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let xi = Vec2::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU));
                let form = QuadraticForm::new(m, xi, x);
                game_p_laplacian_fd(|y| form.value(y), x, h, p)? - deltap_quadratic(&form, p)?
            }
        };
        worst = worst.max(residual.abs());
    }
    let report = VerifyReport {
        field: match field {
            Field::U => "u",
            Field::Linear => "linear",
            Field::Quadratic => "quadratic",
        },
        max_abs_residual: worst,
        points,
        h_policy: format!("central differences, h = {FD_RELATIVE_STEP:e} * |x| * theta_a"),
        seed,
        p,
        a,
        theta_a,
        tol: VERIFY_TOL,
    };
    let json = serde_json::to_string_pretty(&report).expect("plain struct");
    match out {
        Some(path) => write_file(path, &(json + "\n"))?,
        None => println!("{json}"),
    }
    if worst > VERIFY_TOL {
        return Err(CliError::Tolerance(format!("max residual {worst:e} exceeds {VERIFY_TOL:e}")));
    }
    Ok(())
}

pub fn simulate(path: &Path, out: Option<PathBuf>) -> CliResult<()> {
    let text = read_file(path)?;
    let (spec, configured) = config::parse(&text)?;
    let rows = montecarlo::sweep(&spec)?;
    let csv = montecarlo::sweep_csv(&rows);
    let mut summary = String::from("     eps        eta      p  strategy I / II                          mean_tau     scaled      ci95  censored\n");
    for r in &rows {
        let e = &r.estimate;
        summary.push_str(&format!(
            "{:8.4} {:10.6} {:6.3}  {:<40} {:9.1} {:10.5} {:9.5} {:9.4}\n",
            r.eps,
            r.eta,
            r.p,
            format!("{} / {}", r.strategy_i, r.strategy_ii),
            e.mean_tau,
            e.scaled,
            e.scaled_ci95(),
            e.censored_fraction
        ));
        if e.all_censored() {
            eprintln!(
                "warning: every trajectory was censored at eps = {}, eta = {}, p = {}; mean_tau is only a lower bound",
                r.eps, r.eta, r.p
            );
        }
    }
    match out.or(configured) {
        Some(target) => {
            write_file(&target, &csv)?;
            print!("{summary}");
        }
        None => {
            print!("{csv}");
            eprint!("{summary}");
        }
    }
    std::io::stdout().flush().map_err(|e| CliError::Io(format!("stdout: {e}")))
}

pub fn theta_scan(ps: &[f64], a_min: f64, a_max: f64, n: usize, out: &Path) -> CliResult<()> {
    if !(a_min > 0.0 && a_max > a_min && a_max.is_finite()) {
        return Err(CliError::Usage(format!("need 0 < a-min < a-max, got {a_min} and {a_max}")));
    }
    if n < 2 {
        return Err(CliError::Usage("--n must be at least 2".into()));
    }
    if let Some(p) = ps.iter().find(|&&p| !(p > 1.0)) {
        return Err(CliError::Usage(format!("p = {p} must exceed 1")));
    }
    let cfg = OdeConfig::default();
    let mut csv = String::from("p,a,theta_a,critical_half_angle\n");
    for &p in ps {
        let critical = wedge_ode::critical_half_angle_closed(p);
        for i in 0..n {
            let a = a_min * (a_max / a_min).powf(i as f64 / (n - 1) as f64);
            let theta = wedge_ode::theta_a(a, p, &cfg)?;
            csv.push_str(&format!("{p:.16e},{a:.16e},{theta:.16e},{critical:.16e}\n"));
        }
    }
    write_file(out, &csv)
}
