//! Reshape tabular output into labelled series for external plotting.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::commands::{read_file, read_profile, write_file};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub y_err: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub kind: String,
    pub series: Vec<Series>,
}

#[derive(Debug, Deserialize)]
struct ThetaRow {
    p: f64,
    a: f64,
    theta_a: f64,
    critical_half_angle: f64,
}

#[derive(Debug, Deserialize)]
struct SweepRow {
    eps: f64,
    eta: f64,
    p: f64,
    #[serde(rename = "strategy_I")]
    strategy_i: String,
    #[serde(rename = "strategy_II")]
    strategy_ii: String,
    scaled: f64,
    ci95: f64,
}

pub fn run(input: &Path, kind: &str, out: &Path) -> CliResult<()> {
    let data = match kind {
        "theta_vs_a" => theta_vs_a(input)?,
        "profile" => profile(input)?,
        "sweep" => sweep(input)?,
        other => {
            return Err(CliError::Usage(format!("unknown kind `{other}` (expected theta_vs_a, profile or sweep)")))
        }
    };
    let text = if out.extension().is_some_and(|e| e == "csv") {
        long_csv(&data)
    } else {
        serde_json::to_string_pretty(&data).expect("plain struct") + "\n"
    };
    write_file(out, &text)
}

fn rows<T: for<'de> Deserialize<'de>>(input: &Path) -> CliResult<Vec<T>> {
    let text = read_file(input)?;
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| CliError::io(input, e))
}

/// One series per `p`, plus a flat line at its critical half-angle.
fn theta_vs_a(input: &Path) -> CliResult<PlotData> {
    let mut by_p: Vec<(f64, Series, Series)> = Vec::new();
    for r in rows::<ThetaRow>(input)? {
        if by_p.last().is_none_or(|(p, _, _)| *p != r.p) {
            let series = |label: String| Series { label, x: Vec::new(), y: Vec::new(), y_err: None };
            by_p.push((r.p, series(format!("p={}", r.p)), series(format!("critical p={}", r.p))));
        }
        let (_, curve, limit) = by_p.last_mut().expect("just pushed");
        curve.x.push(r.a);
        curve.y.push(r.theta_a);
        limit.x.push(r.a);
        limit.y.push(r.critical_half_angle);
    }
    Ok(PlotData { kind: "theta_vs_a".into(), series: by_p.into_iter().flat_map(|(_, c, l)| [c, l]).collect() })
}

/// `f`, `f'` and `f''` on the full aperture, mirrored from the stored half.
fn profile(input: &Path) -> CliResult<PlotData> {
    let nodes = read_profile(input)?.nodes;
    let mut theta: Vec<f64> = nodes.iter().rev().filter(|n| n.theta > 0.0).map(|n| -n.theta).collect();
    theta.extend(nodes.iter().map(|n| n.theta));
    let mirror = |f: fn(&tugwedge::profile::ProfileNode) -> f64, sign: f64| -> Vec<f64> {
        let mut v: Vec<f64> = nodes.iter().rev().filter(|n| n.theta > 0.0).map(|n| sign * f(n)).collect();
        v.extend(nodes.iter().map(f));
        v
    };
    let series = [("f", mirror(|n| n.y, 1.0)), ("f'", mirror(|n| n.yp, -1.0)), ("f''", mirror(|n| n.ypp, 1.0))]
        .into_iter()
        .map(|(label, y)| Series { label: label.into(), x: theta.clone(), y, y_err: None })
        .collect();
    Ok(PlotData { kind: "profile".into(), series })
}

/// `ε² E[τ]` against `ε`, one series per `(η, p, strategy pair)`, with 95% error bars.
fn sweep(input: &Path) -> CliResult<PlotData> {
    let mut series: Vec<Series> = Vec::new();
    for r in rows::<SweepRow>(input)? {
        let label = format!("eta={} p={} {} vs {}", r.eta, r.p, r.strategy_i, r.strategy_ii);
        let i = match series.iter().position(|s| s.label == label) {
            Some(i) => i,
            None => {
                series.push(Series { label, x: Vec::new(), y: Vec::new(), y_err: Some(Vec::new()) });
                series.len() - 1
            }
        };
        let s = &mut series[i];
        s.x.push(r.eps);
        s.y.push(r.scaled);
        s.y_err.get_or_insert_with(Vec::new).push(r.eps * r.eps * r.ci95);
    }
    Ok(PlotData { kind: "sweep".into(), series })
}

/// `label,x,y,y_err` with an empty `y_err` where the series has none.
fn long_csv(data: &PlotData) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["label", "x", "y", "y_err"]).expect("in-memory write");
    for s in &data.series {
        for (i, (x, y)) in s.x.iter().zip(&s.y).enumerate() {
            let err = s.y_err.as_ref().map(|e| format!("{:.16e}", e[i])).unwrap_or_default();
            w.write_record([s.label.clone(), format!("{x:.16e}"), format!("{y:.16e}"), err]).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}
