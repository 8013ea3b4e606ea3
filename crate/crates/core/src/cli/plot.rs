//! Self-contained SVG log-log plot: `-log10(err)` against `log10(n)`, one series
//! per noise level with its fitted line.

use std::fmt::Write;

use crate::experiments::{ConvergenceReport, ERROR_FLOOR};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 190.0;
const MARGIN_Y: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_Y - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN_Y)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if (hi - lo).abs() < 1e-9 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

/// Renders the reports as an SVG document. Returns `None` when there is nothing to draw.
pub fn render_svg(reports: &[ConvergenceReport], title: &str) -> Option<String> {
    let points: Vec<Vec<(f64, f64)>> = reports
        .iter()
        .map(|r| {
            r.rows
                .iter()
                .map(|row| ((row.n as f64).log10(), -row.err_max.max(ERROR_FLOOR).log10()))
                .collect()
        })
        .collect();
    let all: Vec<(f64, f64)> = points.iter().flatten().copied().collect();
    if all.is_empty() || all.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return None;
    }
    let (x0, x1) = padded(
        all.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        all.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
    );
    let (y0, y1) = padded(
        all.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
        all.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
    );
    let f = Frame { x0, x1, y0, y1 };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="25" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));

    // axes and ticks
    let (left, right) = (f.px(x0), f.px(x1));
    let (bottom, top) = (f.py(y0), f.py(y1));
    let _ = writeln!(svg, r#"<rect x="{left:.1}" y="{top:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#, right - left, bottom - top);
    for i in 0..=5 {
        let x = x0 + (x1 - x0) * i as f64 / 5.0;
        let y = y0 + (y1 - y0) * i as f64 / 5.0;
        let _ = writeln!(svg, r#"<line x1="{0:.1}" y1="{bottom:.1}" x2="{0:.1}" y2="{1:.1}" stroke="black"/>"#, f.px(x), bottom + 5.0);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x:.2}</text>"#, f.px(x), bottom + 18.0);
        let _ = writeln!(svg, r#"<line x1="{0:.1}" y1="{1:.1}" x2="{left:.1}" y2="{1:.1}" stroke="black"/>"#, left - 5.0, f.py(y));
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{y:.2}</text>"#, left - 8.0, f.py(y) + 4.0);
    }
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">log10(n)</text>"#, (left + right) / 2.0, HEIGHT - 10.0);
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{0:.1}" text-anchor="middle" transform="rotate(-90 18 {0:.1})">-log10(err)</text>"#,
        (top + bottom) / 2.0
    );

    for (i, (report, pts)) in reports.iter().zip(&points).enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", f.px(*x), f.py(*y))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1"/>"#, path.join(" "));
        for (x, y) in pts {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, f.px(*x), f.py(*y));
        }
        if let (Some(&first), Some(&last)) = (report.n_range_used.first(), report.n_range_used.last()) {
            let (xa, xb) = ((first as f64).log10(), (last as f64).log10());
            let line = |x: f64| report.slope * x + report.intercept;
            let _ = writeln!(
                svg,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-dasharray="6 4" stroke-width="1.5"/>"#,
                f.px(xa),
                f.py(line(xa)),
                f.px(xb),
                f.py(line(xb))
            );
        }
        let ly = top + 20.0 * (i as f64 + 1.0);
        let lx = right + 15.0;
        let _ = writeln!(svg, r#"<line x1="{lx:.1}" y1="{0:.1}" x2="{1:.1}" y2="{0:.1}" stroke="{color}" stroke-width="2"/>"#, ly - 4.0, lx + 20.0);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{ly:.1}">delta={} slope={:.3}</text>"#,
            lx + 26.0,
            report.noise.delta,
            report.slope
        );
    }
    svg.push_str("</svg>\n");
    Some(svg)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
