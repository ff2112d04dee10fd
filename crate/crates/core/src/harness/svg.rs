//! Minimal SVG line chart of mean WSR versus the sweep value, one polyline
//! per (scheme, profile) series.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use super::AggregateRow;

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 230.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 55.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f",
];

/// Renders the aggregate table as an SVG chart string.
pub fn plot_to_svg(rows: &[AggregateRow]) -> String {
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for row in rows {
        if !row.wsr_mean.is_finite() {
            continue;
        }
        let name = format!("{} / {}", row.scheme, row.profile);
        match series.iter_mut().find(|(n, _)| *n == name) {
            Some((_, pts)) => pts.push((row.sweep_value, row.wsr_mean)),
            None => series.push((name, vec![(row.sweep_value, row.wsr_mean)])),
        }
    }
    let sweep_label = rows
        .first()
        .map(|r| match r.sweep_kind {
            "power" => "power budget (dBm)",
            _ => "sensing SCNR threshold (dB)",
        })
        .unwrap_or("sweep value");

    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, pts) in &series {
        for (x, y) in pts {
            x_min = x_min.min(*x);
            x_max = x_max.max(*x);
            y_min = y_min.min(*y);
            y_max = y_max.max(*y);
        }
    }
    if !x_min.is_finite() {
        x_min = 0.0;
        x_max = 1.0;
        y_min = 0.0;
        y_max = 1.0;
    }
    if (x_max - x_min).abs() < 1e-12 {
        x_max = x_min + 1.0;
    }
    if (y_max - y_min).abs() < 1e-12 {
        y_max = y_min + 1.0;
    }
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| MARGIN_T + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(out, r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##).unwrap();
    // axes
    writeln!(
        out,
        r##"<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="#000" stroke-width="1"/>"##,
        x0 = MARGIN_L,
        x1 = WIDTH - MARGIN_R,
        y1 = HEIGHT - MARGIN_B
    )
    .unwrap();
    writeln!(
        out,
        r##"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="#000" stroke-width="1"/>"##,
        x0 = MARGIN_L,
        y0 = MARGIN_T,
        y1 = HEIGHT - MARGIN_B
    )
    .unwrap();
    // axis labels and extreme ticks
    writeln!(
        out,
        r##"<text x="{x}" y="{y}" font-size="14" text-anchor="middle">{sweep_label}</text>"##,
        x = MARGIN_L + plot_w / 2.0,
        y = HEIGHT - 12.0
    )
    .unwrap();
    writeln!(
        out,
        r##"<text x="18" y="{y}" font-size="14" text-anchor="middle" transform="rotate(-90 18 {y})">mean WSR (bit/s/Hz)</text>"##,
        y = MARGIN_T + plot_h / 2.0
    )
    .unwrap();
    for (val, x) in [(x_min, sx(x_min)), (x_max, sx(x_max))] {
        writeln!(
            out,
            r##"<text x="{x}" y="{y}" font-size="12" text-anchor="middle">{val:.1}</text>"##,
            y = HEIGHT - MARGIN_B + 18.0
        )
        .unwrap();
    }
    for (val, y) in [(y_min, sy(y_min)), (y_max, sy(y_max))] {
        writeln!(
            out,
            r##"<text x="{x}" y="{y}" font-size="12" text-anchor="end">{val:.2}</text>"##,
            x = MARGIN_L - 6.0,
            y = y + 4.0
        )
        .unwrap();
    }
    // series
    for (idx, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let mut path = String::new();
        for (x, y) in pts {
            if !path.is_empty() {
                path.push(' ');
            }
            write!(path, "{:.2},{:.2}", sx(*x), sy(*y)).unwrap();
        }
        writeln!(
            out,
            r#"<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"/>"#
        )
        .unwrap();
        for (x, y) in pts {
            writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                sx(*x),
                sy(*y)
            )
            .unwrap();
        }
        let ly = MARGIN_T + 16.0 + idx as f64 * 20.0;
        writeln!(
            out,
            r#"<line x1="{x0}" y1="{ly}" x2="{x1}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            x0 = WIDTH - MARGIN_R + 14.0,
            x1 = WIDTH - MARGIN_R + 38.0
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{x}" y="{y}" font-size="12">{name}</text>"#,
            x = WIDTH - MARGIN_R + 44.0,
            y = ly + 4.0
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Writes the aggregate chart; errors carry the path context.
pub fn write_plot(rows: &[AggregateRow], path: &Path) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| {
                io::Error::new(e.kind(), format!("creating {}: {e}", parent.display()))
            })?;
        }
    }
    std::fs::write(path, plot_to_svg(rows))
        .map_err(|e| io::Error::new(e.kind(), format!("writing {}: {e}", path.display())))
}
