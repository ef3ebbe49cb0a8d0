//! Hand-written SVG figures: one panel per day class with the raw sales as
//! grey points and the fitted quantile curve as a black polyline.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::panel::SalesPanel;
use crate::qam::QuantileSurface;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

/// Round tick step giving roughly `target` intervals over `span`.
fn nice_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// SVG for day class `j`. Hours on the x axis are labelled as wall-clock
/// hours starting at `open_hour`.
pub fn day_panel_svg(panel: &SalesPanel, surface: &QuantileSurface, j: usize, title: &str, open_hour: u32) -> String {
    let t_count = panel.t_count();
    let points: Vec<(f64, f64)> = (1..=t_count)
        .flat_map(|t| panel.cell(t, j).iter().map(move |&y| (t as f64, y)))
        .collect();
    let curve: Vec<(f64, f64)> = (1..=t_count)
        .filter_map(|t| surface.value(t, j).map(|v| (t as f64, v)))
        .collect();

    let (mut y_lo, mut y_hi) = points
        .iter()
        .chain(&curve)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, y)| (lo.min(y), hi.max(y)));
    if !y_lo.is_finite() {
        (y_lo, y_hi) = (0.0, 1.0);
    }
    if y_hi - y_lo < 1e-9 {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let step = nice_step(y_hi - y_lo, 5.0);
    y_lo = (y_lo / step).floor() * step;
    y_hi = (y_hi / step).ceil() * step;

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let (x_lo, x_hi) = (0.5, t_count as f64 + 0.5);
    let sx = |t: f64| MARGIN_LEFT + (t - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| MARGIN_TOP + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );

    // axes and ticks
    let (x0, y0) = (MARGIN_LEFT, MARGIN_TOP + plot_h);
    let _ = writeln!(
        s,
        r#"<path d="M{x0},{MARGIN_TOP} V{y0} H{}" fill="none" stroke="black"/>"#,
        MARGIN_LEFT + plot_w
    );
    let mut tick = y_lo;
    while tick <= y_hi + step * 1e-6 {
        let y = sy(tick);
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#e0e0e0"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
            x0,
            MARGIN_LEFT + plot_w,
            x0 - 6.0,
            y + 4.0,
            (tick / step).round() * step
        );
        tick += step;
    }
    let label_every = if t_count > 12 { 2 } else { 1 };
    for t in (1..=t_count).step_by(label_every) {
        let x = sx(t as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 18.0,
            open_hour as usize + t - 1
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">hour</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">sales</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );

    let _ = writeln!(s, r##"<g fill="#9e9e9e" fill-opacity="0.6">"##);
    for &(t, y) in &points {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2"/>"#, sx(t), sy(y));
    }
    let _ = writeln!(s, "</g>");

    if !curve.is_empty() {
        let path: Vec<String> = curve.iter().map(|&(t, v)| format!("{:.2},{:.2}", sx(t), sy(v))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="black" stroke-width="2"/>"#,
            path.join(" ")
        );
        let _ = writeln!(s, r#"<g fill="black">"#);
        for &(t, v) in &curve {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5"/>"#, sx(t), sy(v));
        }
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

/// Writes one `day_<j>_<label>.svg` per day class into `dir`.
pub fn write_day_plots(
    dir: &Path,
    panel: &SalesPanel,
    surface: &QuantileSurface,
    labels: &[String],
    open_hour: u32,
) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for j in 1..=panel.j_count() {
        let label = labels.get(j - 1).cloned().unwrap_or_else(|| format!("day{j}"));
        let title = format!("{label}: {}%-quantile", surface.alpha * 100.0);
        let path = dir.join(format!("day_{j}_{label}.svg"));
        fs::write(&path, day_panel_svg(panel, surface, j, &title, open_hour))?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_has_points_and_curve() {
        let panel = SalesPanel::from_cells(vec![vec![vec![1.0, 2.0], vec![3.0], vec![]]], 3).unwrap();
        let surface = QuantileSurface::from_grid(0.9, 3, 1, vec![Some(1.8), Some(3.0), None]);
        let svg = day_panel_svg(&panel, &surface, 1, "Mon <test>", 6);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("r=\"2\"").count(), 3);
        assert_eq!(svg.matches("r=\"3.5\"").count(), 2);
        assert!(svg.contains("<polyline"));
        assert!(svg.contains("Mon &lt;test&gt;"));
    }

    #[test]
    fn nice_steps() {
        assert_eq!(nice_step(10.0, 5.0), 2.0);
        assert_eq!(nice_step(1.0, 5.0), 0.2);
        assert_eq!(nice_step(20.0, 5.0), 5.0);
        assert_eq!(nice_step(37.0, 5.0), 10.0);
    }
}
