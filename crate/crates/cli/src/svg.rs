//! Minimal line-plot writer: stacked panels, axes, one polyline per series.

use std::fmt::Write;

const WIDTH: f64 = 800.0;
const PANEL_HEIGHT: f64 = 240.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

pub struct Panel<'a> {
    pub title: String,
    pub series: Vec<&'a [f64]>,
}

/// Renders each panel against a shared time axis `k * h`.
pub fn line_plot(panels: &[Panel<'_>], h: f64) -> String {
    let height = MARGIN + panels.len() as f64 * (PANEL_HEIGHT + MARGIN);
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for (p, panel) in panels.iter().enumerate() {
        let top = MARGIN + p as f64 * (PANEL_HEIGHT + MARGIN);
        draw_panel(&mut out, panel, top, h);
    }
    out.push_str("</svg>\n");
    out
}

fn draw_panel(out: &mut String, panel: &Panel<'_>, top: f64, h: f64) {
    let left = MARGIN;
    let right = WIDTH - MARGIN / 2.0;
    let bottom = top + PANEL_HEIGHT;
    let len = panel.series.iter().map(|s| s.len()).max().unwrap_or(0);
    let (mut lo, mut hi) = panel
        .series
        .iter()
        .flat_map(|s| s.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        (lo, hi) = (-1.0, 1.0);
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let t_max = (len.max(2) - 1) as f64 * h;
    let sx = |t: f64| left + (right - left) * t / t_max;
    let sy = |v: f64| bottom - (bottom - top) * (v - lo) / (hi - lo);

    writeln!(
        out,
        r#"<text x="{left}" y="{:.1}" font-family="sans-serif" font-size="13">{}</text>"#,
        top - 8.0,
        escape(&panel.title)
    )
    .unwrap();
    writeln!(
        out,
        r#"<polyline points="{left},{top} {left},{bottom} {right},{bottom}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    for (value, y) in [(hi, top), (lo, bottom)] {
        writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="end">{value:.3}</text>"#,
            left - 4.0,
            y + 3.0
        )
        .unwrap();
    }
    for (t, anchor) in [(0.0, "start"), (t_max, "end")] {
        writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="10" text-anchor="{anchor}">{t:.1} s</text>"#,
            sx(t),
            bottom + 14.0
        )
        .unwrap();
    }
    for (k, s) in panel.series.iter().enumerate() {
        let mut pts = String::with_capacity(s.len() * 14);
        for (i, &v) in s.iter().enumerate() {
            if i > 0 {
                pts.push(' ');
            }
            write!(pts, "{:.1},{:.1}", sx(i as f64 * h), sy(v)).unwrap();
        }
        writeln!(
            out,
            r#"<polyline points="{pts}" fill="none" stroke="{}" stroke-width="1" stroke-opacity="0.8"/>"#,
            PALETTE[k % PALETTE.len()]
        )
        .unwrap();
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
