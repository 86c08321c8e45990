use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use serde_json::Value;
use tempfile::TempDir;
use tugwedge::game::{supermartingale_constants, GameParams};
use tugwedge::psolution::{PSolution, DEFAULT_ENLARGEMENT};
use tugwedge::Vec2;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tugwedge"));
    cmd.env_remove("TUGWEDGE_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// `(eps, scaled, ci95 of scaled, censored_fraction)` per row.
fn sweep_rows(text: &str) -> Vec<(f64, f64, f64, f64)> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            let f = |i: usize| rec[i].parse::<f64>().unwrap();
            (f(0), f(7), f(0) * f(0) * f(8), f(9))
        })
        .collect()
}

fn solve_quarter_pi(dir: &TempDir, name: &str) -> PathBuf {
    let out = dir.path().join(name);
    let o = run(&["solve", "--p", "2", "--eta", &FRAC_PI_4.to_string(), "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn critical_angle_at_p2_is_a_right_angle() {
    let o = run(&["critical-angle", "--p", "2", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&o);
    assert!((v["half_angle_closed"].as_f64().unwrap() - FRAC_PI_4).abs() < 1e-15);
    assert!((v["full_angle_closed"].as_f64().unwrap() - FRAC_PI_2).abs() < 1e-15);
    assert!(v["within_tolerance"].as_bool().unwrap());
    let text = run(&["critical-angle", "--p", "2"]);
    assert!(String::from_utf8_lossy(&text.stdout).contains("7.8539816339744"));
}

#[test]
fn critical_angle_routes_agree_at_p_1_5() {
    let v = json(&run(&["critical-angle", "--p", "1.5", "--json"]));
    let closed = v["half_angle_closed"].as_f64().unwrap();
    for key in ["half_angle_quadrature", "half_angle_k_route"] {
        assert!((v[key].as_f64().unwrap() - closed).abs() < 1e-4, "{key}");
    }
}

#[test]
fn critical_angle_rejects_p_at_most_one() {
    for p in ["0.5", "1"] {
        let o = run(&["critical-angle", "--p", p]);
        assert_eq!(o.status.code(), Some(1));
        assert!(stderr(&o).contains("must exceed 1"));
    }
}

#[test]
fn solve_is_accurate_and_deterministic() {
    let dir = TempDir::new().unwrap();
    let first = solve_quarter_pi(&dir, "a.csv");
    let second = solve_quarter_pi(&dir, "b.csv");
    let text = fs::read_to_string(&first).unwrap();
    assert_eq!(text, fs::read_to_string(second).unwrap());
    let residual: f64 =
        text.lines().find_map(|l| l.strip_prefix("# max_residual = ")).expect("residual metadata").parse().unwrap();
    assert!(residual < 1e-6);
    assert!(text.lines().any(|l| l == "theta,y,yp,ypp"));
}

#[test]
fn solve_names_the_critical_angle_when_out_of_range() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x.csv");
    let o = run(&["solve", "--p", "2", "--eta", "1.6", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(&FRAC_PI_2.to_string()), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn verify_three_fields() {
    let dir = TempDir::new().unwrap();
    let prof = solve_quarter_pi(&dir, "u.csv");
    for (field, tol) in [("u", 1e-4), ("linear", 1e-6), ("quadratic", 1e-6)] {
        let o = run(&["verify", "--profile", path_str(&prof), "--field", field, "--seed", "3"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let v = json(&o);
        assert!(v["max_abs_residual"].as_f64().unwrap() < tol, "{field}: {v}");
        assert_eq!(v["points"], 50);
        assert!(v["h_policy"].as_str().unwrap().contains("theta_a"));
    }
    let report = dir.path().join("report.json");
    let o = run(&["verify", "--profile", path_str(&prof), "--points", "7", "--out", path_str(&report)]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(v["points"], 7);
}

#[test]
fn verify_reads_the_fixture_profile() {
    let o = run(&["verify", "--profile", path_str(&fixture("profile_p2.csv"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn verify_rejects_malformed_profiles() {
    let dir = TempDir::new().unwrap();
    let good = fs::read_to_string(fixture("profile_p2.csv")).unwrap();
    let cases = [
        ("header.csv", good.replace("theta,y,yp,ypp", "theta,y")),
        ("meta.csv", good.lines().filter(|l| !l.starts_with("# a =")).collect::<Vec<_>>().join("\n")),
        ("number.csv", good.replacen("0.0000000000000000e0,", "zero,", 1)),
        ("order.csv", {
            let mut lines: Vec<&str> = good.lines().collect();
            let n = lines.len();
            lines.swap(n - 1, n - 2);
            lines.join("\n")
        }),
    ];
    for (name, text) in cases {
        let path = dir.path().join(name);
        fs::write(&path, text).unwrap();
        let o = run(&["verify", "--profile", path_str(&path)]);
        assert_eq!(o.status.code(), Some(3), "{name}: {}", stderr(&o));
        assert!(stderr(&o).contains("malformed profile") || stderr(&o).contains("grid"), "{name}");
    }
    let o = run(&["verify", "--profile", path_str(&dir.path().join("absent.csv"))]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn simulate_reproduces_the_fixture_sweep() {
    let dir = TempDir::new().unwrap();
    let expected = fs::read_to_string(fixture("sweep.csv")).unwrap();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("sweep{threads}.csv"));
        let o = bin()
            .env("TUGWEDGE_THREADS", threads)
            .args(["simulate", "--config", path_str(&fixture("small_sweep.toml")), "--out", path_str(&out)])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(fs::read_to_string(&out).unwrap(), expected);
    }
}

#[test]
fn simulate_writes_the_configured_csv_relative_to_the_working_directory() {
    let dir = TempDir::new().unwrap();
    let cfg = fs::read_to_string(fixture("small_sweep.toml")).unwrap() + "\n[output]\ncsv = \"out.csv\"\n";
    fs::write(dir.path().join("run.toml"), cfg).unwrap();
    let o = bin().current_dir(dir.path()).args(["simulate", "--config", "run.toml"]).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("mean_tau"));
    assert_eq!(
        fs::read_to_string(dir.path().join("out.csv")).unwrap(),
        fs::read_to_string(fixture("sweep.csv")).unwrap()
    );
}

#[test]
fn simulate_schema_errors() {
    let dir = TempDir::new().unwrap();
    let good = fs::read_to_string(fixture("small_sweep.toml")).unwrap();
    let cases = [
        (good.replace("n_traj = 200\n", ""), "n_traj"),
        (good.replace("seed = 7", "seed = 7\nseeds = 8"), "seeds"),
        (good.replace("\"pull_axis(1,0)\"", "\"pull_axis(0,0)\""), "line 19"),
        (good.replace("eps = [0.2, 0.1]", "eps = [0.2, 1.5]"), "line 7"),
        (good.replace("kind = \"wedge\"", "kind = \"disc\""), "line 2"),
    ];
    for (i, (text, needle)) in cases.into_iter().enumerate() {
        let path = dir.path().join(format!("bad{i}.toml"));
        fs::write(&path, text).unwrap();
        let o = run(&["simulate", "--config", path_str(&path)]);
        assert_eq!(o.status.code(), Some(1), "case {i}");
        assert!(stderr(&o).contains(needle), "case {i}: {}", stderr(&o));
    }
}

#[test]
fn simulate_warns_when_everything_is_censored() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(fixture("small_sweep.toml"))
        .unwrap()
        .replace("seed = 7", "seed = 7\nmax_steps = 50")
        .replace("\"pull_pos_grad_u\"", "\"null_move\"")
        .replace("\"pull_axis(1,0)\"", "\"null_move\"")
        .replace("II = \"pull_neg_grad_u\"", "II = \"null_move\"");
    let path = dir.path().join("lazy.toml");
    fs::write(&path, text).unwrap();
    let o = run(&["simulate", "--config", path_str(&path), "--out", path_str(&dir.path().join("lazy.csv"))]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("warning: every trajectory was censored"));
}

#[test]
fn bundled_convex_wedge_stays_below_the_supermartingale_bound() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("cw.csv");
    let o = run(&["simulate", "--config", path_str(&bundled("convex_wedge.toml")), "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (eta, p) = (FRAC_PI_4, 2.0);
    let alpha = GameParams::canonical(p, 0.1, 0).unwrap().alpha;
    let u = Arc::new(PSolution::for_game_wedge(eta, p, alpha, DEFAULT_ENLARGEMENT, 257).unwrap());
    let u0 = u.u(u.translation() + Vec2::E1);
    let rows = sweep_rows(&fs::read_to_string(out).unwrap());
    assert_eq!(rows.len(), 12);
    for (eps, scaled, ci, censored) in rows {
        let params = GameParams::canonical(p, eps, 0).unwrap();
        let c = supermartingale_constants(&u, &params).unwrap();
        let bound = u0 / (0.5 * params.beta - c.c1_sharp * eps);
        assert!(scaled <= bound + 3.0 * ci, "eps = {eps}: {scaled} > {bound}");
        assert_eq!(censored, 0.0);
    }
}

#[test]
fn bundled_half_plane_column_increases() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("hp.csv");
    let o = run(&["simulate", "--config", path_str(&bundled("half_plane.toml")), "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = sweep_rows(&fs::read_to_string(out).unwrap());
    assert_eq!(rows.len(), 3);
    assert!(rows.windows(2).all(|w| w[0].0 > w[1].0 && w[0].1 < w[1].1), "{rows:?}");
}

fn plot(input: &Path, kind: &str, out: &Path) -> Output {
    run(&["plotdata", "--in", path_str(input), "--kind", kind, "--out", path_str(out)])
}

#[test]
fn plotdata_round_trips_the_fixtures() {
    let dir = TempDir::new().unwrap();
    for (input, kind, n_series, n_points, has_err) in [
        ("theta_scan.csv", "theta_vs_a", 6, 9, false),
        ("profile_p2.csv", "profile", 3, 65, false),
        ("sweep.csv", "sweep", 4, 2, true),
    ] {
        let as_json = dir.path().join(format!("{kind}.json"));
        let as_csv = dir.path().join(format!("{kind}.csv"));
        assert!(plot(&fixture(input), kind, &as_json).status.success(), "{kind}");
        assert!(plot(&fixture(input), kind, &as_csv).status.success(), "{kind}");
        let v: Value = serde_json::from_str(&fs::read_to_string(&as_json).unwrap()).unwrap();
        assert_eq!(v["kind"], kind);
        let series = v["series"].as_array().unwrap();
        assert_eq!(series.len(), n_series, "{kind}");
        let mut flat = Vec::new();
        for s in series {
            let x = s["x"].as_array().unwrap();
            assert_eq!(x.len(), n_points, "{kind}");
            assert_eq!(s.get("y_err").is_some(), has_err, "{kind}");
            for i in 0..x.len() {
                flat.push((
                    s["label"].as_str().unwrap().to_string(),
                    x[i].as_f64().unwrap(),
                    s["y"][i].as_f64().unwrap(),
                ));
            }
        }
        let text = fs::read_to_string(&as_csv).unwrap();
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let long: Vec<(String, f64, f64)> = r
            .records()
            .map(|rec| {
                let rec = rec.unwrap();
                (rec[0].to_string(), rec[1].parse().unwrap(), rec[2].parse().unwrap())
            })
            .collect();
        assert_eq!(long, flat, "{kind}");
    }
    let profile: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("profile.json")).unwrap()).unwrap();
    let x = profile["series"][0]["x"].as_array().unwrap();
    assert_eq!(x[0].as_f64().unwrap(), -x[x.len() - 1].as_f64().unwrap());
}

#[test]
fn plotdata_rejects_unknown_kinds() {
    let dir = TempDir::new().unwrap();
    let o = plot(&fixture("sweep.csv"), "histogram", &dir.path().join("x.json"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown kind"));
    let o = plot(&fixture("profile_p2.csv"), "sweep", &dir.path().join("x.json"));
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn theta_scan_matches_the_fixture() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("ts.csv");
    let o = run(&[
        "theta-scan",
        "--p",
        "1.5",
        "2",
        "3",
        "--a-min",
        "0.01",
        "--a-max",
        "100",
        "--n",
        "9",
        "--out",
        path_str(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out).unwrap();
    assert_eq!(text, fs::read_to_string(fixture("theta_scan.csv")).unwrap());
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<(f64, f64, f64, f64)> = r.deserialize().map(|x| x.unwrap()).collect();
    for w in rows.windows(2).filter(|w| w[0].0 == w[1].0) {
        assert!(w[0].2 < w[1].2 && w[1].2 < w[1].3);
    }
}

#[test]
fn usage_and_help_exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["solve", "--p", "2"]).status.code(), Some(1));
    let o = bin().env("TUGWEDGE_THREADS", "many").args(["critical-angle", "--p", "2"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}
