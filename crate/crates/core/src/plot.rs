//! Minimal static line plots as SVG.

use crate::error::Result;
use std::fmt::Write as _;
use std::path::Path;

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#444444"];

pub struct Series<'a> {
    pub label: &'a str,
    pub values: &'a [f64],
    /// Draw markers instead of a line.
    pub points: bool,
}

pub fn line_plot_svg(title: &str, xlabel: &str, x: &[f64], series: &[Series]) -> String {
    let (w, h, m) = (720.0, 420.0, 50.0);
    let finite = |v: &&f64| v.is_finite();
    let xmin = x.iter().filter(finite).copied().fold(f64::INFINITY, f64::min);
    let xmax = x.iter().filter(finite).copied().fold(f64::NEG_INFINITY, f64::max);
    let all = series.iter().flat_map(|s| s.values.iter()).filter(finite);
    let (mut ymin, mut ymax) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if !(ymax > ymin) {
        ymin -= 1.0;
        ymax += 1.0;
    }
    let pad = 0.05 * (ymax - ymin);
    let (ymin, ymax) = (ymin - pad, ymax + pad);
    let xs = |v: f64| m + (v - xmin) / (xmax - xmin).max(f64::MIN_POSITIVE) * (w - 2.0 * m);
    let ys = |v: f64| h - m - (v - ymin) / (ymax - ymin) * (h - 2.0 * m);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#, w - 2.0 * m, h - 2.0 * m);
    if ymin < 0.0 && ymax > 0.0 {
        let _ = writeln!(svg, r##"<line x1="{m}" x2="{}" y1="{y}" y2="{y}" stroke="#bbb"/>"##, w - m, y = ys(0.0));
    }
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 12.0, escape(xlabel));
    let _ = writeln!(svg, r#"<text x="{m}" y="{}" text-anchor="middle">{xmin:.3}</text>"#, h - m + 15.0);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{xmax:.3}</text>"#, w - m, h - m + 15.0);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{ymax:.3e}</text>"#, m - 4.0, m + 4.0);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{ymin:.3e}</text>"#, m - 4.0, h - m);
    for (k, s) in series.iter().enumerate() {
        let c = COLORS[k % COLORS.len()];
        if s.points {
            for (xv, yv) in x.iter().zip(s.values).filter(|(a, b)| a.is_finite() && b.is_finite()) {
                let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="1.8" fill="{c}"/>"#, xs(*xv), ys(*yv));
            }
        } else {
            let pts: Vec<String> = x
                .iter()
                .zip(s.values)
                .filter(|(a, b)| a.is_finite() && b.is_finite())
                .map(|(a, b)| format!("{:.2},{:.2}", xs(*a), ys(*b)))
                .collect();
            let _ = writeln!(svg, r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        }
        let ly = m + 16.0 + 16.0 * k as f64;
        let _ = writeln!(svg, r#"<rect x="{}" y="{}" width="12" height="4" fill="{c}"/>"#, w - m - 150.0, ly - 6.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{ly}">{}</text>"#, w - m - 132.0, escape(s.label));
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn write_line_plot(path: &Path, title: &str, xlabel: &str, x: &[f64], series: &[Series]) -> Result<()> {
    std::fs::write(path, line_plot_svg(title, xlabel, x, series))?;
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_contains_each_series() {
        let x = [0.0, 1.0, 2.0];
        let svg = line_plot_svg(
            "t <1>",
            "x",
            &x,
            &[
                Series { label: "sim", values: &[0.0, 1.0, f64::NAN], points: true },
                Series { label: "oracle", values: &[0.0, 0.5, 1.0], points: false },
            ],
        );
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(svg.contains("t &lt;1&gt;"));
    }
}
