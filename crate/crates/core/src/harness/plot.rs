use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::run::{EvalPoint, RunReport};
use crate::error::{Error, Result};
use crate::scalar::format_exact;

pub const METRICS_HEADER: &str = "step,return_mean,return_std,loss_critic,loss_actor,mean_u,mean_w";

pub fn metrics_csv(report: &RunReport) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for p in &report.evals {
        let fields = [p.return_mean, p.return_std, p.loss_critic, p.loss_actor, p.mean_u, p.mean_w];
        out.push_str(&p.step.to_string());
        for f in fields {
            out.push(',');
            out.push_str(&format_exact(f));
        }
        out.push('\n');
    }
    out
}

/// Parses a metrics CSV back into eval points (`omega_entropy` is not stored and comes back NaN).
pub fn parse_metrics_csv(text: &str) -> Result<Vec<EvalPoint>> {
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err(Error::Parse("metrics CSV header mismatch".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 7 {
                return Err(Error::Parse(format!("expected 7 columns in {line:?}")));
            }
            let num = |i: usize| cols[i].parse::<f64>().map_err(|e| Error::Parse(format!("{}: {e}", cols[i])));
            Ok(EvalPoint {
                step: cols[0].parse().map_err(|e| Error::Parse(format!("step: {e}")))?,
                return_mean: num(1)?,
                return_std: num(2)?,
                loss_critic: num(3)?,
                loss_actor: num(4)?,
                mean_u: num(5)?,
                mean_w: num(6)?,
                omega_entropy: f64::NAN,
            })
        })
        .collect()
}

/// One labelled line of a learning-curve chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn from_evals(label: impl Into<String>, evals: &[EvalPoint]) -> Self {
        Series { label: label.into(), points: evals.iter().map(|p| (p.step as f64, p.return_mean)).collect() }
    }
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Self-contained SVG line chart of return against step, one polyline per series.
pub fn curve_svg(title: &str, series: &[Series]) -> Result<String> {
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).filter(|p| p.1.is_finite()).collect();
    if pts.is_empty() {
        return Err(Error::rejected("nothing to plot"));
    }
    let (w, h, ml, mr, mt, mb) = (640.0, 400.0, 70.0, 150.0, 40.0, 50.0);
    let (mut x0, mut x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (mut y0, mut y1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    if x1 <= x0 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if y1 <= y0 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let sy = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, (ml + w - mr) / 2.0, escape(title));
    let _ = writeln!(
        svg,
        r#"<path d="M{ml},{mt} L{ml},{} L{},{}" fill="none" stroke="black"/>"#,
        h - mb,
        w - mr,
        h - mb
    );
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, sx(fx), h - mb + 18.0, tick(fx));
        let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, ml - 6.0, sy(fy) + 4.0, tick(fy));
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">step</text>"#, (ml + w - mr) / 2.0, h - 10.0);
    let _ = writeln!(svg, r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">return</text>"#, h / 2.0, h / 2.0);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let finite: Vec<&(f64, f64)> = s.points.iter().filter(|p| p.1.is_finite()).collect();
        let coords: Vec<String> = finite.iter().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1))).collect();
        let _ = writeln!(svg, r#"<polyline class="series" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, coords.join(" "));
        for p in &finite {
            let _ = writeln!(svg, r#"<circle class="marker" cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, sx(p.0), sy(p.1));
        }
        let ly = mt + 16.0 * i as f64;
        let _ = writeln!(svg, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, w - mr + 10.0, w - mr + 30.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, w - mr + 35.0, ly + 4.0, escape(&s.label));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn tick(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.0}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `metrics.csv` and `curve.svg` for one run into `dir`.
pub fn emit_curves(report: &RunReport, dir: impl AsRef<Path>) -> Result<()> {
    if report.evals.is_empty() {
        return Err(Error::rejected("report has no eval points"));
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    fs::write(dir.join("metrics.csv"), metrics_csv(report))?;
    let title = format!("{} / {} / seed {}", report.variant, report.gap, report.seed);
    fs::write(dir.join("curve.svg"), curve_svg(&title, &[Series::from_evals(format!("seed {}", report.seed), &report.evals)])?)?;
    Ok(())
}
