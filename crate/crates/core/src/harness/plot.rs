//! Minimal SVG line plots with optional error bands.

use std::fmt::Write as _;

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Half-width of the band drawn around each point.
    pub err: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn span(vals: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = vals
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        return None;
    }
    Some(if lo == hi { (lo - 0.5, hi + 0.5) } else { (lo, hi) })
}

pub fn line_plot(spec: &PlotSpec, series: &[Series]) -> Result<String> {
    if series.is_empty() {
        return Err(Error::Empty("plot series"));
    }
    for s in series {
        if s.xs.len() != s.ys.len() {
            return Err(Error::LengthMismatch(s.xs.len(), s.ys.len()));
        }
        if let Some(e) = &s.err {
            if e.len() != s.ys.len() {
                return Err(Error::LengthMismatch(e.len(), s.ys.len()));
            }
        }
        if spec.log_x && s.xs.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::InvalidConfig("log x axis needs positive x values".into()));
        }
    }
    let tx = |x: f64| if spec.log_x { x.log2() } else { x };
    let (x0, x1) = span(series.iter().flat_map(|s| s.xs.iter().map(|&x| tx(x)))).ok_or(Error::Empty("finite x values"))?;
    let (y0, y1) = span(series.iter().flat_map(|s| {
        let e = s.err.clone().unwrap_or_else(|| vec![0.0; s.ys.len()]);
        s.ys.iter()
            .zip(e)
            .flat_map(|(&y, e)| [y - e, y + e])
            .collect::<Vec<_>>()
    }))
    .ok_or(Error::Empty("finite y values"))?;
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let px = |x: f64| LEFT + (tx(x) - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, escape(&spec.title));
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let xlab = if spec.log_x { format!("2^{:.1}", xv) } else { format!("{:.3}", xv) };
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, LEFT + f * pw, TOP + ph + 18.0, xlab);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#, LEFT - 6.0, TOP + (1.0 - f) * ph + 4.0, yv);
    }
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 10.0, escape(&spec.x_label));
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&spec.y_label)
    );

    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<(f64, f64, f64)> = s
            .xs
            .iter()
            .zip(&s.ys)
            .enumerate()
            .filter(|(_, (x, y))| x.is_finite() && y.is_finite())
            .map(|(i, (&x, &y))| (x, y, s.err.as_ref().map_or(0.0, |e| e[i])))
            .collect();
        if s.err.is_some() {
            let upper = pts.iter().map(|&(x, y, e)| format!("{:.2},{:.2}", px(x), py(y + e)));
            let lower = pts.iter().rev().map(|&(x, y, e)| format!("{:.2},{:.2}", px(x), py(y - e)));
            let poly: Vec<String> = upper.chain(lower).collect();
            let _ = writeln!(svg, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, poly.join(" "));
        }
        let line: Vec<String> = pts.iter().map(|&(x, y, _)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, line.join(" "));
        let ly = TOP + 14.0 + 18.0 * k as f64;
        let lx = W - RIGHT + 10.0;
        let _ = writeln!(svg, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&s.name));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
