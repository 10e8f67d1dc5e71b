//! Minimal deterministic SVG output: corridor plots and corner bar charts.

use std::fmt::Write;

use crate::analysis::{CornerReport, Corridor};
use crate::error::{Error, Result};

const W: f64 = 720.0;
const H: f64 = 440.0;
const MARGIN: f64 = 60.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        MARGIN + (v - self.x0) / (self.x1 - self.x0) * (W - 2.0 * MARGIN)
    }

    fn y(&self, v: f64) -> f64 {
        H - MARGIN - (v - self.y0) / (self.y1 - self.y0) * (H - 2.0 * MARGIN)
    }

    fn points(&self, pts: &[(f64, f64)]) -> String {
        pts.iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.3},{:.3}", self.x(x), self.y(y)))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let (l, r, b, t) = (MARGIN, W - MARGIN, H - MARGIN, MARGIN);
    let _ = writeln!(
        out,
        r#"<path d="M{l},{t} L{l},{b} L{r},{b}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    for i in 0..=4 {
        let xv = f.x0 + (f.x1 - f.x0) * i as f64 / 4.0;
        let yv = f.y0 + (f.y1 - f.y0) * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="10" text-anchor="middle">{:.1}</text>"#,
            f.x(xv),
            b + 14.0,
            xv
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="10" text-anchor="end">{:.1}</text>"#,
            l - 4.0,
            f.y(yv) + 3.0,
            yv
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 18.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Measured delays against a center function, with the `old` and `new`
/// corridors shaded. The plot holds exactly four polylines: measured,
/// center, lower and upper border of the `new` corridor.
pub fn corridor_svg(title: &str, measured: &[(f64, f64)], old: &Corridor, new: &Corridor) -> Result<String> {
    if measured.is_empty() {
        return Err(Error::invalid("nothing to plot"));
    }
    let ts: Vec<f64> = measured.iter().map(|p| p.0).collect();
    let series = |g: &dyn Fn(f64) -> f64| -> Vec<(f64, f64)> { ts.iter().map(|&t| (t, g(t))).collect() };
    let center = series(&|t| new.center.value(t));
    let lower = series(&|t| new.lower(t));
    let upper = series(&|t| new.upper(t));
    let old_lower = series(&|t| old.lower(t));
    let old_upper = series(&|t| old.upper(t));

    let ys = measured
        .iter()
        .chain(&lower)
        .chain(&upper)
        .chain(&old_lower)
        .chain(&old_upper)
        .map(|p| p.1)
        .filter(|v| v.is_finite());
    let (mut y0, mut y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (mut x0, mut x1) = (ts[0], ts[ts.len() - 1]);
    if !(y1 > y0) {
        y0 -= 1.0;
        y1 += 1.0;
    }
    if !(x1 > x0) {
        x0 -= 1.0;
        x1 += 1.0;
    }
    let pad = 0.05 * (y1 - y0);
    let f = Frame { x0, x1, y0: y0 - pad, y1: y1 + pad };

    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, "T [fs]", "delay [fs]");
    let band = |lo: &[(f64, f64)], hi: &[(f64, f64)]| {
        let mut pts: Vec<(f64, f64)> = hi.to_vec();
        pts.extend(lo.iter().rev());
        f.points(&pts)
    };
    let _ = writeln!(
        out,
        r##"<polygon class="band-old" points="{}" fill="#d62728" fill-opacity="0.15" stroke="none"/>"##,
        band(&old_lower, &old_upper)
    );
    let _ = writeln!(
        out,
        r##"<polygon class="band-new" points="{}" fill="#1f77b4" fill-opacity="0.2" stroke="none"/>"##,
        band(&lower, &upper)
    );
    for (class, pts, color, dash) in [
        ("lower", &lower, "#1f77b4", "4 3"),
        ("upper", &upper, "#1f77b4", "4 3"),
        ("center", &center, "black", "none"),
        ("measured", &measured.to_vec(), "#2ca02c", "none"),
    ] {
        let _ = writeln!(
            out,
            r#"<polyline class="{class}" points="{}" fill="none" stroke="{color}" stroke-width="1.5" stroke-dasharray="{dash}"/>"#,
            f.points(pts)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Grouped bars of the per-corner mean deviation under both bound sets.
/// Each bar carries its exact value in a `data-value` attribute.
pub fn corner_bar_chart(title: &str, report: &CornerReport) -> Result<String> {
    let agg = report.aggregate();
    if agg.is_empty() {
        return Err(Error::invalid("empty corner report"));
    }
    let top = agg
        .iter()
        .flat_map(|a| [a.1, a.2])
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let f = Frame { x0: 0.0, x1: agg.len() as f64, y0: 0.0, y1: 1.1 * top };
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, "corner", "mean coverage deviation [fs]");
    let slot = (W - 2.0 * MARGIN) / agg.len() as f64;
    let bar = 0.35 * slot;
    for (i, (label, old, new)) in agg.iter().enumerate() {
        let x = MARGIN + i as f64 * slot + 0.15 * slot;
        for (k, (set, v, color)) in [("old", *old, "#d62728"), ("new", *new, "#1f77b4")].into_iter().enumerate() {
            let y = f.y(v);
            let _ = writeln!(
                out,
                r#"<rect class="bar" data-corner="{}" data-bounds="{set}" data-value="{v}" x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{color}"/>"#,
                escape(label),
                x + k as f64 * bar,
                y,
                bar,
                (H - MARGIN - y).max(0.0)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#,
            x + bar,
            H - MARGIN + 28.0,
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// `(corner, bounds, value)` triples read back from a bar chart.
pub fn bar_values(svg: &str) -> Vec<(String, String, f64)> {
    let attr = |tag: &str, name: &str| -> Option<String> {
        let key = format!("{name}=\"");
        let start = tag.find(&key)? + key.len();
        let end = tag[start..].find('"')? + start;
        Some(tag[start..end].to_string())
    };
    svg.split("<rect")
        .skip(1)
        .filter_map(|tag| {
            let tag = &tag[..tag.find("/>")?];
            let corner = attr(tag, "data-corner")?;
            let bounds = attr(tag, "data-bounds")?;
            let value = attr(tag, "data-value")?.parse().ok()?;
            Some((corner, bounds, value))
        })
        .collect()
}
