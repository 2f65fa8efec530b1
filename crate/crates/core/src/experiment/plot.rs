//! Log-scale convergence plots as standalone SVG.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::{read_trace_csv, TraceRow};

/// One curve: worst-agent distance per tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(u64, f64)>,
}

impl Series {
    /// Max over agents of `dist2` at each tick present in `rows`.
    pub fn worst_agent(label: impl Into<String>, rows: &[TraceRow]) -> Self {
        let mut points: Vec<(u64, f64)> = Vec::new();
        for r in rows {
            match points.last_mut() {
                Some((k, v)) if *k == r.k => *v = v.max(r.dist2),
                _ => points.push((r.k, r.dist2)),
            }
        }
        points.sort_by_key(|p| p.0);
        Series { label: label.into(), points }
    }
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 78.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 24.0;
const BOTTOM: f64 = 56.0;
const STYLES: [(&str, &str); 4] = [("#1f4e9c", ""), ("#c0392b", "7 4"), ("#2e8b57", "2 3"), ("#7d3c98", "10 3 2 3")];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn fmt_decade(e: i32) -> String {
    if (-3..=3).contains(&e) {
        format!("{}", 10f64.powi(e))
    } else {
        format!("1e{e}")
    }
}

/// Renders the curves on a log-10 y axis, with an optional horizontal
/// reference line at `epsilon`.
pub fn render_svg(series: &[Series], epsilon: Option<f64>) -> Result<String> {
    if series.is_empty() {
        return Err(Error::invalid("nothing to plot"));
    }
    if let Some(e) = epsilon {
        if !(e > 0.0) || !e.is_finite() {
            return Err(Error::invalid(format!("epsilon must be positive, got {e}")));
        }
    }
    let positive = series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).chain(epsilon).filter(|v| *v > 0.0 && v.is_finite());
    let (lo, hi) = positive.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (dec_lo, dec_hi) = if lo.is_finite() {
        let (a, b) = (lo.log10().floor() as i32, hi.log10().ceil() as i32);
        (a, if b > a { b } else { a + 1 })
    } else {
        (-1, 0)
    };
    let k_max = series.iter().flat_map(|s| s.points.last().map(|p| p.0)).max().unwrap_or(0).max(1) as f64;

    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let x_of = |k: f64| LEFT + pw * k / k_max;
    let floor = 10f64.powi(dec_lo);
    let y_of = |v: f64| {
        let l = v.max(floor).log10();
        TOP + ph * (dec_hi as f64 - l) / (dec_hi - dec_lo) as f64
    };

    let mut svg = String::new();
    let w = &mut svg;
    let _ = writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    let step = if dec_hi - dec_lo > 12 { 2 } else { 1 };
    for e in (dec_lo..=dec_hi).step_by(step) {
        let y = y_of(10f64.powi(e));
        let _ = writeln!(w, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e5e5e5"/>"##, LEFT + pw);
        let _ = writeln!(w, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, fmt_decade(e));
    }
    let raw = k_max / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let tick = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|t| *t >= raw).unwrap_or(raw).max(1.0);
    let mut k = 0.0;
    while k <= k_max + 1e-9 {
        let x = x_of(k);
        let _ = writeln!(w, r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#444"/>"##, TOP + ph, TOP + ph + 5.0);
        let _ = writeln!(w, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{k}</text>"#, TOP + ph + 18.0);
        k += tick;
    }
    let _ = writeln!(w, r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##);
    let _ = writeln!(w, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">timestep k</text>"#, LEFT + pw / 2.0, HEIGHT - 14.0);
    let _ = writeln!(
        w,
        r#"<text transform="translate(18 {:.2}) rotate(-90)" text-anchor="middle">distance to optimum (worst agent, 2-norm)</text>"#,
        TOP + ph / 2.0
    );

    for (idx, s) in series.iter().enumerate() {
        let (color, dash) = STYLES[idx % STYLES.len()];
        let mut d = String::new();
        for (n, (k, v)) in s.points.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2}", if n == 0 { "M" } else { " L" }, x_of(*k as f64), y_of(*v));
        }
        let dash_attr = if dash.is_empty() { String::new() } else { format!(r#" stroke-dasharray="{dash}""#) };
        let _ = writeln!(w, r#"<path class="curve" d="{d}" fill="none" stroke="{color}" stroke-width="1.6"{dash_attr}/>"#);
    }
    if let Some(e) = epsilon {
        let y = y_of(e);
        let _ = writeln!(
            w,
            r##"<line class="epsilon" x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0b000" stroke-width="1.6" stroke-dasharray="9 3 2 3"/>"##,
            LEFT + pw
        );
    }

    let mut entries: Vec<(String, &str, &str)> =
        series.iter().enumerate().map(|(i, s)| (escape(&s.label), STYLES[i % STYLES.len()].0, STYLES[i % STYLES.len()].1)).collect();
    if let Some(e) = epsilon {
        entries.push((format!("epsilon = {e}"), "#e0b000", "9 3 2 3"));
    }
    let lx = LEFT + pw - 210.0;
    let _ = writeln!(
        w,
        r##"<rect x="{:.2}" y="{:.2}" width="200" height="{:.2}" fill="white" fill-opacity="0.85" stroke="#ccc"/>"##,
        lx - 8.0,
        TOP + 4.0,
        18.0 * entries.len() as f64 + 6.0
    );
    for (i, (label, color, dash)) in entries.iter().enumerate() {
        let y = TOP + 16.0 + 18.0 * i as f64;
        let dash_attr = if dash.is_empty() { String::new() } else { format!(r#" stroke-dasharray="{dash}""#) };
        let _ = writeln!(w, r#"<line x1="{lx:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="1.6"{dash_attr}/>"#, lx + 28.0);
        let _ = writeln!(w, r#"<text x="{:.2}" y="{:.2}">{label}</text>"#, lx + 34.0, y + 4.0);
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Reads every trace, renders, and only then writes `out`, so a bad input
/// leaves no file behind.
pub fn plot_traces(traces: &[&Path], labels: &[String], epsilon: Option<f64>, out: &Path) -> Result<()> {
    if traces.is_empty() {
        return Err(Error::invalid("at least one trace file is required"));
    }
    if !labels.is_empty() && labels.len() != traces.len() {
        return Err(Error::invalid(format!("{} labels given for {} traces", labels.len(), traces.len())));
    }
    let mut series = Vec::with_capacity(traces.len());
    for (i, path) in traces.iter().enumerate() {
        let file = std::fs::File::open(path).map_err(|e| Error::io(*path, e))?;
        let rows = read_trace_csv(std::io::BufReader::new(file), path)?;
        let label = labels.get(i).cloned().unwrap_or_else(|| {
            path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| format!("run {i}"))
        });
        series.push(Series::worst_agent(label, &rows));
    }
    let svg = render_svg(&series, epsilon)?;
    std::fs::write(out, svg).map_err(|e| Error::io(out, e))
}
