use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::StudyRecord;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub x: f64,
    pub y: f64,
    /// Mapped onto the colour ramp between the smallest and largest value.
    pub color: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxesConfig {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub color_label: String,
    pub log_x: bool,
    pub width: u32,
    pub height: u32,
}

impl Default for AxesConfig {
    fn default() -> Self {
        AxesConfig {
            title: String::new(),
            x_label: "x".into(),
            y_label: "y".into(),
            color_label: String::new(),
            log_x: false,
            width: 640,
            height: 480,
        }
    }
}

/// CV_U against mean trained accuracy (percent), coloured by log10 of the
/// parameter count.
pub fn study_scatter_points(records: &[StudyRecord]) -> Vec<ScatterPoint> {
    records
        .iter()
        .map(|r| ScatterPoint {
            x: r.cv_u,
            y: 100.0 * r.mu_t,
            color: (r.n_params as f64).log10(),
        })
        .collect()
}

const VIRIDIS: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (VIRIDIS.len() - 1) as f64;
    let i = (t.floor() as usize).min(VIRIDIS.len() - 2);
    let f = t - i as f64;
    let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
    let mix = |p: f64, q: f64| (p + (q - p) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    mag * if r < 1.5 {
        1.0
    } else if r < 3.0 {
        2.0
    } else if r < 7.0 {
        5.0
    } else {
        10.0
    }
}

/// Axis range and tick positions, both in plot coordinates.
fn axis(values: impl Iterator<Item = f64>, log: bool) -> (f64, f64, Vec<f64>) {
    let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if !lo.is_finite() {
        (lo, hi) = if log { (-2.0, 0.0) } else { (0.0, 1.0) };
    }
    if log {
        let (l, h) = (lo.floor(), hi.ceil().max(lo.floor() + 1.0));
        let ticks = (l as i64..=h as i64).map(|k| k as f64).collect();
        return (l, h, ticks);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let step = nice_step(hi - lo);
    let (l, h) = ((lo / step).floor() * step, (hi / step).ceil() * step);
    let n = ((h - l) / step).round() as i64;
    let ticks = (0..=n).map(|i| l + i as f64 * step).collect();
    (l, h, ticks)
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        return format!("1e{}", v as i64);
    }
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Standalone SVG 1.1 scatter plot. Points with a non-finite coordinate, or
/// a non-positive x on a log axis, are skipped and counted in a comment.
pub fn render_scatter_svg(points: &[ScatterPoint], axes: &AxesConfig) -> String {
    let usable: Vec<(f64, f64, f64)> = points
        .iter()
        .filter(|p| p.x.is_finite() && p.y.is_finite() && p.color.is_finite() && (!axes.log_x || p.x > 0.0))
        .map(|p| (if axes.log_x { p.x.log10() } else { p.x }, p.y, p.color))
        .collect();
    let skipped = points.len() - usable.len();
    let (w, h) = (f64::from(axes.width), f64::from(axes.height));
    let (left, right, top, bottom) = (70.0, w - 100.0, 40.0, h - 60.0);
    let (x0, x1, xt) = axis(usable.iter().map(|p| p.0), axes.log_x);
    let (y0, y1, yt) = axis(usable.iter().map(|p| p.1), false);
    let (c0, c1) = usable
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.2), h.max(p.2)));
    let sx = |v: f64| left + (v - x0) / (x1 - x0) * (right - left);
    let sy = |v: f64| bottom - (v - y0) / (y1 - y0) * (bottom - top);
    let ct = |v: f64| if c1 > c0 { (v - c0) / (c1 - c0) } else { 0.5 };

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif" font-size="12">"#,
        axes.width, axes.height, axes.width, axes.height
    );
    let _ = writeln!(s, "<!-- skipped {skipped} points -->");
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        (left + right) / 2.0,
        escape(&axes.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{left:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    );
    s.push_str("<g stroke=\"black\">\n");
    for &t in &xt {
        let _ = writeln!(s, r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}"/>"#, sx(t), bottom, bottom + 5.0);
    }
    for &t in &yt {
        let _ = writeln!(s, r#"<line x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}"/>"#, left - 5.0, sy(t), left);
    }
    s.push_str("</g>\n<g>\n");
    for &t in &xt {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            sx(t),
            bottom + 18.0,
            tick_label(t, axes.log_x)
        );
    }
    for &t in &yt {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 8.0,
            sy(t) + 4.0,
            tick_label(t, false)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        h - 20.0,
        escape(&axes.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{0:.2}" text-anchor="middle" transform="rotate(-90 20 {0:.2})">{1}</text>"#,
        (top + bottom) / 2.0,
        escape(&axes.y_label)
    );
    s.push_str("</g>\n<g fill-opacity=\"0.85\">\n");
    for &(x, y, c) in &usable {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{}"/>"#, sx(x), sy(y), ramp(ct(c)));
    }
    s.push_str("</g>\n<g>\n");
    let (bx, bw, steps) = (right + 25.0, 14.0, 20);
    let bh = (bottom - top) / f64::from(steps);
    for i in 0..steps {
        let t = f64::from(i) / f64::from(steps - 1);
        let _ = writeln!(
            s,
            r#"<rect x="{bx:.2}" y="{:.2}" width="{bw:.2}" height="{:.2}" fill="{}"/>"#,
            bottom - f64::from(i + 1) * bh,
            bh + 0.5,
            ramp(t)
        );
    }
    if c0.is_finite() {
        for (v, y) in [(c0, bottom), (c1, top + 10.0)] {
            let _ = writeln!(s, r#"<text x="{:.2}" y="{y:.2}">{}</text>"#, bx + bw + 4.0, super::format_sig(v));
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{0:.2}" y="{1:.2}" text-anchor="middle" transform="rotate(90 {0:.2} {1:.2})">{2}</text>"#,
        bx + bw + 40.0,
        (top + bottom) / 2.0,
        escape(&axes.color_label)
    );
    s.push_str("</g>\n</svg>\n");
    s
}

pub fn emit_scatter_svg(points: &[ScatterPoint], axes: &AxesConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_scatter_svg(points, axes)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axes(log_x: bool) -> AxesConfig {
        AxesConfig {
            title: "t".into(),
            x_label: "CV_U".into(),
            y_label: "acc".into(),
            color_label: "log10 params".into(),
            log_x,
            ..AxesConfig::default()
        }
    }

    #[test]
    fn empty_plot_has_axes_only() {
        let svg = render_scatter_svg(&[], &axes(true));
        assert!(svg.contains("<!-- skipped 0 points -->"));
        assert!(!svg.contains("<circle"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn skips_unplottable_points() {
        let pts = [
            ScatterPoint { x: 0.1, y: 50.0, color: 3.0 },
            ScatterPoint { x: f64::NAN, y: 50.0, color: 3.0 },
            ScatterPoint { x: 0.0, y: 50.0, color: 3.0 },
            ScatterPoint { x: 0.2, y: f64::INFINITY, color: 3.0 },
        ];
        let svg = render_scatter_svg(&pts, &axes(true));
        assert!(svg.contains("<!-- skipped 3 points -->"));
        assert_eq!(svg.matches("<circle").count(), 1);
        assert_eq!(render_scatter_svg(&pts, &axes(false)).matches("<circle").count(), 2);
    }

    #[test]
    fn ramp_endpoints() {
        assert_eq!(ramp(0.0), "#440154");
        assert_eq!(ramp(1.0), "#fde725");
    }

    #[test]
    fn many_points_stay_small() {
        let pts: Vec<ScatterPoint> = (0..10_000)
            .map(|i| ScatterPoint {
                x: 0.01 + i as f64 * 1e-4,
                y: (i % 97) as f64,
                color: (i % 13) as f64,
            })
            .collect();
        let svg = render_scatter_svg(&pts, &axes(true));
        assert!(svg.len() < 5_000_000);
        assert_eq!(svg, render_scatter_svg(&pts, &axes(true)));
    }
}
