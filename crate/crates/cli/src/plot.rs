//! Training-curve plots as standalone SVG.
//!
//! Two panels share the epoch axis: training loss on the left and test
//! accuracy on the right. Each model contributes one series to each panel.

use std::fmt::Write;

use hqnn_core::MetricsRecord;

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 380.0;
const PANEL_W: f64 = 380.0;
const PANEL_H: f64 = 260.0;
const TOP: f64 = 50.0;
const LEFTS: [f64; 2] = [70.0, 510.0];
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// A labelled metrics history.
pub struct Series<'a> {
    pub label: &'a str,
    pub records: &'a [MetricsRecord],
}

struct Panel {
    title: &'static str,
    value: fn(&MetricsRecord) -> f64,
    y_range: (f64, f64),
}

/// Renders `series` (one or more models) to SVG text. Identical input gives identical bytes.
pub fn render_svg(series: &[Series]) -> String {
    let epochs = series.iter().flat_map(|s| s.records.iter().map(|r| r.epoch as f64));
    let (mut x0, mut x1) = epochs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| (lo.min(e), hi.max(e)));
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 - x0 < 1.0 {
        (x0, x1) = (x0 - 0.5, x1 + 0.5);
    }
    let max_loss = series.iter().flat_map(|s| s.records.iter().map(|r| r.train_loss)).fold(0.0_f64, f64::max);
    let panels = [
        Panel {
            title: "training loss",
            value: |r| r.train_loss,
            y_range: (0.0, if max_loss > 0.0 { max_loss * 1.05 } else { 1.0 }),
        },
        Panel { title: "test accuracy", value: |r| r.test_accuracy, y_range: (0.0, 1.0) },
    ];

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    for (panel, &left) in panels.iter().zip(&LEFTS) {
        draw_axes(&mut svg, panel, left, (x0, x1));
        for (k, s) in series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let pts: Vec<(f64, f64)> = s
                .records
                .iter()
                .map(|r| {
                    let px = left + (r.epoch as f64 - x0) / (x1 - x0) * PANEL_W;
                    let (y0, y1) = panel.y_range;
                    let py = TOP + PANEL_H - ((panel.value)(r) - y0) / (y1 - y0) * PANEL_H;
                    (px, py)
                })
                .collect();
            if pts.len() > 1 {
                let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let _ = writeln!(
                    svg,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    path.join(" ")
                );
            }
            for (x, y) in &pts {
                let _ = writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{color}"/>"#);
            }
        }
    }
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let y = HEIGHT - 18.0;
        let x = LEFTS[0] + 200.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/>"#,
            x + 20.0
        );
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, x + 26.0, y + 4.0, escape(s.label));
    }
    svg.push_str("</svg>\n");
    svg
}

fn draw_axes(svg: &mut String, panel: &Panel, left: f64, (x0, x1): (f64, f64)) {
    let bottom = TOP + PANEL_H;
    let _ = writeln!(
        svg,
        r#"<rect x="{left:.2}" y="{TOP:.2}" width="{PANEL_W:.2}" height="{PANEL_H:.2}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">{}</text>"#,
        left + PANEL_W / 2.0,
        TOP - 15.0,
        panel.title
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">epoch</text>"#,
        left + PANEL_W / 2.0,
        bottom + 35.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">value</text>"#,
        left - 45.0,
        TOP + PANEL_H / 2.0,
        left - 45.0,
        TOP + PANEL_H / 2.0
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (y0, y1) = panel.y_range;
        let y = bottom - f * PANEL_H;
        let _ =
            writeln!(svg, r#"<line x1="{:.2}" y1="{y:.2}" x2="{left:.2}" y2="{y:.2}" stroke="black"/>"#, left - 4.0);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.2}</text>"#,
            left - 6.0,
            y + 4.0,
            y0 + f * (y1 - y0)
        );
        let x = left + f * PANEL_W;
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{bottom:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
            bottom + 4.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{:.1}</text>"#,
            bottom + 17.0,
            x0 + f * (x1 - x0)
        );
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
