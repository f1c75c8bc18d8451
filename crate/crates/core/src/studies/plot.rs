//! Minimal static SVG line plot of a study table.

use std::fmt::Write as _;
use std::io::{self, Write};

use super::sweep::StudyTable;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLOURS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// Plots `T_ob` against the last numeric axis with one polyline per
/// combination of the remaining axis values. Non-numeric or failed points
/// are skipped.
pub fn write_svg_plot(t: &StudyTable, title: &str, mut out: impl Write) -> io::Result<()> {
    let x_axis = t
        .axes
        .iter()
        .rposition(|_| true)
        .filter(|&k| t.rows.iter().any(|r| r.axis_f64(k).is_some()));
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    if let Some(k) = x_axis {
        for r in t.rows.iter().filter(|r| r.ok()) {
            let (Some(x), Some(y)) = (r.axis_f64(k), r.t_ob) else {
                continue;
            };
            let key: Vec<String> = t
                .axes
                .iter()
                .zip(&r.axes)
                .enumerate()
                .filter(|(i, _)| *i != k)
                .map(|(_, (a, v))| format!("{a}={v}"))
                .collect();
            let key = key.join(", ");
            match series.iter_mut().find(|s| s.0 == key) {
                Some(s) => s.1.push((x, y)),
                None => series.push((key, vec![(x, y)])),
            }
        }
    }
    let pts = series.iter().flat_map(|s| s.1.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 >= x1 {
        x1 = x0 + 1.0;
    }
    if y0 >= y1 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<path d="M{m} {m} V{b} H{r}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    );
    let xl = x_axis.map(|k| t.axes[k].as_str()).unwrap_or("");
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 16.0,
        escape(xl)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">T_ob [K]</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (v, anchor, x, y) in [
        (x0, "middle", sx(x0), H - MARGIN + 14.0),
        (x1, "middle", sx(x1), H - MARGIN + 14.0),
        (y0, "end", MARGIN - 4.0, sy(y0)),
        (y1, "end", MARGIN - 4.0, sy(y1)),
    ] {
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}">{v:.4}</text>"#
        );
    }
    for (i, (key, p)) in series.iter().enumerate() {
        let c = COLOURS[i % COLOURS.len()];
        let d: Vec<String> = p
            .iter()
            .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#,
            d.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" fill="{c}">{}</text>"#,
            W - MARGIN - 150.0,
            MARGIN + 14.0 * i as f64,
            escape(key)
        );
    }
    s.push_str("</svg>\n");
    out.write_all(s.as_bytes())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
