//! Minimal SVG line charts: one polyline per series through the medians and a
//! shaded band between the quartiles.

use crate::error::Result;
use crate::experiments::CellResult;
use crate::io::atomic_write;
use std::fmt::Write as _;
use std::path::Path;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<Point>,
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * hi.abs().max(1.0) {
        let pad = 0.5 * lo.abs().max(1.0);
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (x0, x1) = extent(series.iter().flat_map(|s| s.points.iter().map(|p| p.x)));
    let (y0, y1) = extent(series.iter().flat_map(|s| s.points.iter().flat_map(|p| [p.lower, p.upper, p.median])));
    let (y0, y1) = (y0.min(0.0), y1 * 1.05);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{title}</text>"#, WIDTH / 2.0);
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{left},{top} L{left},{bottom} L{right},{bottom}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"#,
            sx(xv),
            bottom + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{}</text>"#,
            left - 6.0,
            sy(yv) + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{x_label}</text>"#, WIDTH / 2.0, HEIGHT - 18.0);
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 16 {})">{y_label}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );

    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<&Point> = s.points.iter().filter(|p| p.median.is_finite()).collect();
        if pts.is_empty() {
            continue;
        }
        let mut band = String::new();
        for p in &pts {
            let _ = write!(band, "{:.2},{:.2} ", sx(p.x), sy(p.upper));
        }
        for p in pts.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", sx(p.x), sy(p.lower));
        }
        let _ = writeln!(svg, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band.trim_end());
        let line: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.median))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" "));
        for p in &pts {
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, sx(p.x), sy(p.median));
        }
        let ly = top + 16.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" fill="{color}" text-anchor="end">{}</text>"#,
            right,
            ly,
            s.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}").trim_end_matches('0').trim_end_matches('.').to_owned()
    }
}

/// Groups cells by `key`, ordering points by `x`, with values scaled by `scale(cell)`.
fn collect(
    cells: &[CellResult],
    key: impl Fn(&CellResult) -> usize,
    label: &str,
    x: impl Fn(&CellResult) -> f64,
    scale: impl Fn(&CellResult) -> f64,
) -> Vec<Series> {
    let mut keys: Vec<usize> = cells.iter().map(&key).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.into_iter()
        .map(|k| {
            let mut points: Vec<Point> = cells
                .iter()
                .filter(|c| key(c) == k)
                .map(|c| {
                    let f = scale(c);
                    Point { x: x(c), median: c.mse_median * f, lower: c.mse_q25 * f, upper: c.mse_q75 * f }
                })
                .collect();
            points.sort_by(|a, b| a.x.total_cmp(&b.x));
            Series { label: format!("{label} = {k}"), points }
        })
        .collect()
}

/// Writes `mse_vs_T.svg`, `mseT_vs_T.svg`, `mse_vs_s.svg` and `mse_over_s_vs_s.svg` into `dir`.
pub fn write_experiment_plots(cells: &[CellResult], dir: &Path) -> Result<()> {
    let t = |c: &CellResult| c.transitions as f64;
    let s = |c: &CellResult| c.s as f64;
    let charts = [
        ("mse_vs_T.svg", "Median MSE vs T", "T", "MSE", collect(cells, |c| c.s, "s", t, |_| 1.0)),
        ("mseT_vs_T.svg", "Median MSE x T vs T", "T", "MSE x T", collect(cells, |c| c.s, "s", t, |c| c.transitions as f64)),
        ("mse_vs_s.svg", "Median MSE vs s", "s", "MSE", collect(cells, |c| c.transitions, "T", s, |_| 1.0)),
        (
            "mse_over_s_vs_s.svg",
            "Median MSE / s vs s",
            "s",
            "MSE / s",
            collect(cells, |c| c.transitions, "T", s, |c| 1.0 / c.s.max(1) as f64),
        ),
    ];
    for (name, title, xl, yl, series) in charts {
        atomic_write(&dir.join(name), line_chart(title, xl, yl, &series).as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_contains_one_polyline_per_series() {
        let series = vec![
            Series { label: "a".into(), points: vec![Point { x: 1.0, median: 2.0, lower: 1.5, upper: 2.5 }, Point { x: 2.0, median: 1.0, lower: 0.5, upper: 1.5 }] },
            Series { label: "b".into(), points: vec![Point { x: 1.0, median: 3.0, lower: 3.0, upper: 3.0 }] },
        ];
        let svg = line_chart("t", "x", "y", &series);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("<polygon").count(), 2);
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn empty_chart_is_valid() {
        let svg = line_chart("t", "x", "y", &[]);
        assert!(svg.contains("</svg>"));
        assert!(!svg.contains("NaN"));
    }
}
