//! ESS-per-second figures as standalone SVG.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::PlotAxis;
use crate::error::{HarnessError, Result};
use crate::experiment::ResultRow;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Mean and standard error of ESS/sec at one x position.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotPoint {
    pub x: f64,
    pub mean: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<PlotPoint>,
    /// No x coordinate of its own; drawn as a horizontal line.
    pub flat: bool,
}

fn x_of(row: &ResultRow, axis: PlotAxis) -> Option<f64> {
    match axis {
        PlotAxis::ProposalScale => row.proposal_scale,
        PlotAxis::TEnd => Some(row.t_end),
    }
}

/// Aggregates successful rows of one parameter into plotted series.
pub fn collect_series(rows: &[&ResultRow], axis: PlotAxis) -> Vec<Series> {
    let mut groups: BTreeMap<&str, BTreeMap<Option<u64>, Vec<f64>>> = BTreeMap::new();
    for r in rows {
        if let (Some(v), true) = (r.ess_per_sec, r.error.is_empty()) {
            groups.entry(r.series.as_str()).or_default().entry(x_of(r, axis).map(f64::to_bits)).or_default().push(v);
        }
    }
    groups
        .into_iter()
        .map(|(name, by_x)| {
            let flat = by_x.keys().all(Option::is_none);
            let mut points: Vec<PlotPoint> = by_x
                .into_iter()
                .map(|(x, vals)| {
                    let n = vals.len() as f64;
                    let mean = vals.iter().sum::<f64>() / n;
                    let var = if vals.len() > 1 { vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
                    PlotPoint { x: x.map_or(f64::NAN, f64::from_bits), mean, se: (var / n).sqrt() }
                })
                .collect();
            points.sort_by(|a, b| a.x.total_cmp(&b.x));
            Series { name: name.to_string(), points, flat }
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Scale {
    lo: f64,
    hi: f64,
    log: bool,
    from: f64,
    to: f64,
}

impl Scale {
    fn new(mut lo: f64, mut hi: f64, log: bool, from: f64, to: f64) -> Self {
        if log {
            lo = lo.log10();
            hi = hi.log10();
        }
        if (hi - lo).abs() < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        Scale { lo, hi, log, from, to }
    }

    fn map(&self, v: f64) -> f64 {
        let v = if self.log { v.max(1e-300).log10() } else { v };
        self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            (self.lo.floor() as i32..=self.hi.ceil() as i32).map(|e| 10f64.powi(e)).filter(|t| {
                let l = t.log10();
                l >= self.lo - 1e-9 && l <= self.hi + 1e-9
            }).collect()
        } else {
            (0..=4).map(|k| self.lo + (self.hi - self.lo) * k as f64 / 4.0).collect()
        }
    }
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.0e}")
    } else {
        format!("{}", (v * 1000.0).round() / 1000.0)
    }
}

/// SVG document for one parameter. The y axis turns logarithmic when the
/// plotted means span four decades or more.
pub fn render_svg(title: &str, x_label: &str, series: &[Series]) -> String {
    let xs: Vec<f64> = series.iter().filter(|s| !s.flat).flat_map(|s| s.points.iter().map(|p| p.x)).filter(|x| *x > 0.0).collect();
    let (x_lo, x_hi) = if xs.is_empty() {
        (1.0, 10.0)
    } else {
        (xs.iter().cloned().fold(f64::INFINITY, f64::min), xs.iter().cloned().fold(0.0, f64::max))
    };
    let ys: Vec<f64> = series.iter().flat_map(|s| s.points.iter()).flat_map(|p| [p.mean - p.se, p.mean + p.se, p.mean]).collect();
    let pos: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.mean)).filter(|m| *m > 0.0).collect();
    let p_lo = pos.iter().cloned().fold(f64::INFINITY, f64::min);
    let p_hi = pos.iter().cloned().fold(0.0, f64::max);
    let log_y = !pos.is_empty() && p_hi / p_lo >= 1e4;
    let (y_lo, y_hi) = if log_y {
        (p_lo, p_hi)
    } else if ys.is_empty() {
        (0.0, 1.0)
    } else {
        (ys.iter().cloned().fold(f64::INFINITY, f64::min).min(0.0), ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
    };
    let sx = Scale::new(x_lo, x_hi, true, LEFT, WIDTH - RIGHT);
    let sy = Scale::new(y_lo, y_hi, log_y, HEIGHT - BOTTOM, TOP);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text class="title" x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, (LEFT + WIDTH - RIGHT) / 2.0, escape(title));
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let _ = writeln!(s, r#"<g class="axes" stroke="black"><line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/></g>"#);
    for t in sx.ticks() {
        let x = sx.map(t);
        let _ = writeln!(s, r#"<g class="xtick"><line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text></g>"#, y0 + 5.0, y0 + 18.0, fmt_tick(t));
    }
    for t in sy.ticks() {
        let y = sy.map(t);
        let _ = writeln!(s, r#"<g class="ytick"><line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text></g>"#, x0 - 5.0, x0 - 8.0, y + 4.0, fmt_tick(t));
    }
    let _ = writeln!(s, r#"<text class="xlabel" x="{}" y="{}" text-anchor="middle">{} (log scale)</text>"#, (x0 + x1) / 2.0, HEIGHT - 15.0, escape(x_label));
    let y_label = if log_y { "ESS / second (log scale)" } else { "ESS / second" };
    let _ = writeln!(s, r#"<text class="ylabel" transform="translate(18 {}) rotate(-90)" text-anchor="middle">{y_label}</text>"#, (y0 + y1) / 2.0);

    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<(f64, f64, f64, f64)> = if ser.flat {
            let p = &ser.points[0];
            [x_lo, x_hi].iter().map(|&x| (sx.map(x), sy.map(p.mean), sy.map(p.mean - p.se), sy.map(p.mean + p.se))).collect()
        } else {
            ser.points.iter().map(|p| (sx.map(p.x), sy.map(p.mean), sy.map(p.mean - p.se), sy.map(p.mean + p.se))).collect()
        };
        let line: Vec<String> = pts.iter().map(|(x, y, _, _)| format!("{x:.2},{y:.2}")).collect();
        let dash = if ser.flat { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(s, r#"<g class="series-group">"#);
        let _ = writeln!(s, r#"<polyline class="series" data-series="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#, escape(&ser.name), line.join(" "));
        let shown = if ser.flat { &pts[..1] } else { &pts[..] };
        for (x, y, lo, hi) in shown {
            let _ = writeln!(s, r#"<line class="errorbar" x1="{x:.2}" y1="{lo:.2}" x2="{x:.2}" y2="{hi:.2}" stroke="{color}"/>"#);
            let _ = writeln!(s, r#"<circle class="marker" cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{color}"/>"#);
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let _ = writeln!(s, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/><text class="legend" x="{}" y="{}">{}</text>"#, x1 + 15.0, x1 + 35.0, x1 + 40.0, ly + 4.0, escape(&ser.name));
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

/// Writes one SVG per (experiment, parameter) into `dir`.
pub fn emit_plots(rows: &[ResultRow], dir: &Path, axis: PlotAxis) -> Result<Vec<PathBuf>> {
    let mut groups: BTreeMap<(&str, &str), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.experiment.as_str(), r.parameter.as_str())).or_default().push(r);
    }
    if groups.is_empty() {
        return Ok(Vec::new());
    }
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let x_label = match axis {
        PlotAxis::ProposalScale => "proposal scale",
        PlotAxis::TEnd => "t_end",
    };
    let mut paths = Vec::new();
    for ((experiment, parameter), rs) in groups {
        let series = collect_series(&rs, axis);
        let svg = render_svg(&format!("{experiment}: {parameter}"), x_label, &series);
        let stem: String = format!("{experiment}__{parameter}")
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
            .collect();
        let path = dir.join(format!("{stem}.svg"));
        std::fs::write(&path, svg).map_err(|e| HarnessError::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}
