//! Self-contained SVG figure grids: one panel per (receiver, sender) cell,
//! senders as columns, receivers as rows, fixed 0..1 vertical axis.

use std::fmt::Write;

use icoh::ConnectivityMap;

const PANEL_W: f64 = 150.0;
const PANEL_H: f64 = 100.0;
const GAP: f64 = 12.0;
const LEFT: f64 = 80.0;
const TOP: f64 = 80.0;
const BOTTOM: f64 = 50.0;
const RIGHT: f64 = 20.0;

pub const RED: &str = "#d62728";
pub const BLUE: &str = "#1f4fb4";

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub map: &'a ConnectivityMap,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Draws every series in order, so later series sit on top.
pub fn grid_svg(title: &str, series: &[Series<'_>]) -> String {
    let q = series.first().map(|s| s.map.channels()).unwrap_or(0);
    let (f_lo, f_hi) = series
        .iter()
        .flat_map(|s| s.map.grid.frequencies().iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| (lo.min(f), hi.max(f)));
    let span = if f_hi > f_lo { f_hi - f_lo } else { 1.0 };
    let width = LEFT + q as f64 * (PANEL_W + GAP) - GAP + RIGHT;
    let height = TOP + q as f64 * (PANEL_H + GAP) - GAP + BOTTOM;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{LEFT}" y="20" font-size="14" font-weight="bold">{}</text>"#, escape(title));

    let mut legend_x = LEFT;
    for s in series {
        let _ = writeln!(
            svg,
            r#"<line x1="{legend_x}" y1="36" x2="{:.0}" y2="36" stroke="{}" stroke-width="2"/><text x="{:.0}" y="40">{}</text>"#,
            legend_x + 20.0,
            s.color,
            legend_x + 25.0,
            escape(s.label)
        );
        legend_x += 40.0 + 7.0 * s.label.len() as f64;
    }

    for j in 0..q {
        let x = LEFT + j as f64 * (PANEL_W + GAP) + PANEL_W / 2.0;
        let _ = writeln!(svg, r#"<text x="{x:.1}" y="{:.0}" text-anchor="middle">sender {}</text>"#, TOP - 8.0, j + 1);
    }
    for i in 0..q {
        let y = TOP + i as f64 * (PANEL_H + GAP) + PANEL_H / 2.0;
        let _ = writeln!(
            svg,
            r#"<text x="20" y="{y:.1}" text-anchor="middle" transform="rotate(-90 20 {y:.1})">receiver {}</text>"#,
            i + 1
        );
    }

    for i in 0..q {
        for j in 0..q {
            let x0 = LEFT + j as f64 * (PANEL_W + GAP);
            let y0 = TOP + i as f64 * (PANEL_H + GAP);
            let fill = if i == j { "#f4f4f4" } else { "none" };
            let _ = writeln!(
                svg,
                r##"<rect x="{x0:.1}" y="{y0:.1}" width="{PANEL_W}" height="{PANEL_H}" fill="{fill}" stroke="#999"/>"##
            );
            for s in series {
                let points: Vec<String> = s
                    .map
                    .grid
                    .frequencies()
                    .iter()
                    .zip(&s.map.values)
                    .map(|(f, m)| {
                        let v = m[(i, j)].clamp(0.0, 1.0);
                        format!("{:.2},{:.2}", x0 + (f - f_lo) / span * PANEL_W, y0 + PANEL_H - v * PANEL_H)
                    })
                    .collect();
                let _ = writeln!(
                    svg,
                    r#"<polyline fill="none" stroke="{}" stroke-width="1.2" points="{}"/>"#,
                    s.color,
                    points.join(" ")
                );
            }
            if j == 0 {
                let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">1</text>"#, x0 - 4.0, y0 + 8.0);
                let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">0</text>"#, x0 - 4.0, y0 + PANEL_H);
            }
            if i + 1 == q {
                let yb = y0 + PANEL_H + 14.0;
                let _ = writeln!(svg, r#"<text x="{x0:.1}" y="{yb:.1}">{f_lo}</text>"#);
                let _ = writeln!(svg, r#"<text x="{:.1}" y="{yb:.1}" text-anchor="end">{f_hi} Hz</text>"#, x0 + PANEL_W);
            }
        }
    }
    svg.push_str("</svg>\n");
    svg
}
