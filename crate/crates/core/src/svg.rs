//! Self-contained SVG plots with byte-stable output.
//!
//! Coordinates are printed with a fixed number of decimals and elements are
//! emitted in data order, so identical input gives identical bytes.

use std::fmt::Write as _;

use crate::channel::Points;
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;

/// Linear map from a data interval onto a pixel interval.
#[derive(Debug, Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, px_lo: f64, px_hi: f64) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !(lo.is_finite() && hi.is_finite()) {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
            lo -= 0.5;
            hi += 0.5;
        }
        Self { lo, hi, px_lo, px_hi }
    }

    fn map(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, x: &Axis, y: &Axis, x_label: &str, y_label: &str) {
    let (x0, x1) = (MARGIN, WIDTH - MARGIN);
    let (y0, y1) = (HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(out, r#"<g stroke="black" stroke-width="1">"#);
    let _ = writeln!(out, r#"<line x1="{x0:.1}" y1="{y0:.1}" x2="{x1:.1}" y2="{y0:.1}"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0:.1}" y1="{y0:.1}" x2="{x0:.1}" y2="{y1:.1}"/>"#);
    let _ = writeln!(out, "</g>");
    for (v, px) in [(x.lo, x0), (x.hi, x1)] {
        let _ = writeln!(
            out,
            r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            y0 + 16.0,
            tick(v)
        );
    }
    for (v, py) in [(y.lo, y0), (y.hi, y1)] {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            py + 4.0,
            tick(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 16.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    format!("{v:.3}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Smooth color over the unit square: red grows with `u`, green with `v`.
fn color(u: f64, v: f64) -> String {
    let c = |t: f64| (t.clamp(0.0, 1.0) * 255.0).round() as u8;
    format!("#{:02x}{:02x}{:02x}", c(u), c(v), c(1.0 - 0.5 * (u + v)))
}

/// Scatter plot of a 2-D chart, one circle per point. With ground-truth
/// positions each point is colored by its normalized location.
pub fn scatter(chart: &Points, positions: Option<&Points>) -> Result<String> {
    if chart.dim() != 2 {
        return Err(Error::Domain(format!(
            "scatter plot needs a 2-D chart, got {} columns",
            chart.dim()
        )));
    }
    if chart.is_empty() {
        return Err(Error::Format("no data".into()));
    }
    if let Some(p) = positions {
        if p.len() != chart.len() || p.dim() < 2 {
            return Err(Error::Domain("positions do not match the chart".into()));
        }
    }
    let x = Axis::fit(chart.rows().map(|r| r[0]), MARGIN, WIDTH - MARGIN);
    let y = Axis::fit(chart.rows().map(|r| r[1]), HEIGHT - MARGIN, MARGIN);
    let fill = positions.map(|p| {
        let px = Axis::fit(p.rows().map(|r| r[0]), 0.0, 1.0);
        let py = Axis::fit(p.rows().map(|r| r[1]), 0.0, 1.0);
        p.rows().map(|r| color(px.map(r[0]), py.map(r[1]))).collect::<Vec<_>>()
    });
    let mut out = String::new();
    header(&mut out, "Channel chart");
    axes(&mut out, &x, &y, "z1", "z2");
    let _ = writeln!(out, r#"<g stroke="none">"#);
    for (i, r) in chart.rows().enumerate() {
        let c = fill.as_ref().map_or("#3060c0", |f| f[i].as_str());
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{c}"/>"#,
            x.map(r[0]),
            y.map(r[1])
        );
    }
    let _ = writeln!(out, "</g>");
    let legend = if positions.is_some() {
        "color: ground-truth position"
    } else {
        "chart points"
    };
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{legend}</text>"#,
        WIDTH - MARGIN,
        MARGIN - 8.0
    );
    out.push_str("</svg>\n");
    Ok(out)
}

/// Continuity and trustworthiness against `K`: two polylines with one
/// vertex per row, axes and a legend.
pub fn curves(ks: &[f64], continuity: &[f64], trustworthiness: &[f64]) -> Result<String> {
    if ks.is_empty() {
        return Err(Error::Format("no data".into()));
    }
    if continuity.len() != ks.len() || trustworthiness.len() != ks.len() {
        return Err(Error::Domain("curve columns differ in length".into()));
    }
    let x = Axis::fit(ks.iter().copied(), MARGIN, WIDTH - MARGIN);
    let y = Axis::fit(
        continuity.iter().chain(trustworthiness).copied().chain([1.0]),
        HEIGHT - MARGIN,
        MARGIN,
    );
    let mut out = String::new();
    header(&mut out, "Continuity and trustworthiness");
    axes(&mut out, &x, &y, "K", "score");
    let series = [("CT", "#c03030", continuity), ("TW", "#3060c0", trustworthiness)];
    for (_, stroke, values) in &series {
        let pts: Vec<String> = ks
            .iter()
            .zip(values.iter())
            .map(|(&k, &v)| format!("{:.2},{:.2}", x.map(k), y.map(v)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{stroke}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
    }
    for (row, (name, stroke, _)) in series.iter().enumerate() {
        let ly = MARGIN + 12.0 + 16.0 * row as f64;
        let lx = WIDTH - MARGIN - 80.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{stroke}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}">{name}</text>"#, lx + 26.0, ly + 4.0);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scatter_has_one_circle_per_point() {
        let chart = Points::from_rows(&[[0.0, 0.0], [1.0, 2.0], [-1.0, 0.5]]).unwrap();
        let svg = scatter(&chart, None).unwrap();
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        let colored = scatter(&chart, Some(&chart)).unwrap();
        assert_eq!(colored.matches("<circle").count(), 3);
        assert_eq!(colored, scatter(&chart, Some(&chart)).unwrap());
    }

    #[test]
    fn scatter_rejects_other_dimensions() {
        let chart = Points::from_rows(&[[0.0, 0.0, 1.0]]).unwrap();
        assert!(matches!(scatter(&chart, None), Err(Error::Domain(_))));
    }

    #[test]
    fn curves_have_two_polylines_with_one_vertex_per_row() {
        let ks: Vec<f64> = (1..=10).map(|k| k as f64 * 5.0).collect();
        let ct: Vec<f64> = ks.iter().map(|k| 1.0 - k / 100.0).collect();
        let tw: Vec<f64> = ks.iter().map(|k| 1.0 - k / 200.0).collect();
        let svg = curves(&ks, &ct, &tw).unwrap();
        let lines: Vec<&str> = svg.lines().filter(|l| l.starts_with("<polyline")).collect();
        assert_eq!(lines.len(), 2);
        for l in lines {
            let points = l.split("points=\"").nth(1).unwrap().trim_end_matches("\"/>");
            assert_eq!(points.split(' ').count(), 10);
        }
        assert!(svg.contains(">CT<") && svg.contains(">TW<"));
    }

    #[test]
    fn single_point_plots_do_not_divide_by_zero() {
        let chart = Points::from_rows(&[[2.0, 2.0]]).unwrap();
        assert!(!scatter(&chart, None).unwrap().contains("NaN"));
        assert!(!curves(&[5.0], &[1.0], &[1.0]).unwrap().contains("NaN"));
    }
}
