//! SVG line charts of `episodes.csv`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
/// Episodes averaged per plotted point.
const SMOOTHING: usize = 10;
const COLORS: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

struct Series {
    label: String,
    values: Vec<Option<f64>>,
}

/// Writes `surprise.svg` and `return.svg` next to `episodes.csv` in `dir`:
/// one thin line per seed and a thick mean line, smoothed over a window of
/// ten episodes.
pub fn plot(dir: &Path) -> Result<()> {
    let path = dir.join("episodes.csv");
    let mut reader = csv::Reader::from_path(&path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let mut columns: Vec<Vec<Option<f64>>> = vec![Vec::new(); headers.len()];
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        for (col, field) in columns.iter_mut().zip(record.iter()) {
            col.push(if field.is_empty() {
                None
            } else {
                Some(field.parse().map_err(|_| Error::Parse(format!("bad number {field:?} in {}", path.display())))?)
            });
        }
    }
    if columns.first().is_none_or(|c| c.is_empty()) {
        return Err(Error::Parse(format!("{} has no episodes", path.display())));
    }
    let pick = |mean: &str, prefix: &str| -> Vec<Series> {
        let mut out: Vec<Series> = headers
            .iter()
            .zip(&columns)
            .filter_map(|(h, c)| {
                h.strip_prefix(prefix).map(|seed| Series { label: seed.to_string(), values: c.clone() })
            })
            .collect();
        if let Some(i) = headers.iter().position(|h| h == mean) {
            out.push(Series { label: "mean".into(), values: columns[i].clone() });
        }
        out
    };
    let charts = [
        ("surprise.svg", "1-step surprise", pick("mean_surprise_1", "surprise_1_")),
        ("return.svg", "episode return", pick("mean_return", "return_")),
    ];
    for (file, title, series) in charts {
        std::fs::write(dir.join(file), render(title, &series))?;
    }
    Ok(())
}

fn smooth(values: &[Option<f64>]) -> Vec<(f64, f64)> {
    values
        .chunks(SMOOTHING)
        .enumerate()
        .filter_map(|(i, chunk)| {
            let present: Vec<f64> = chunk.iter().flatten().copied().collect();
            (!present.is_empty()).then(|| {
                let x = (i * SMOOTHING) as f64 + chunk.len() as f64 / 2.0;
                (x, present.iter().sum::<f64>() / present.len() as f64)
            })
        })
        .collect()
}

fn render(title: &str, series: &[Series]) -> String {
    let lines: Vec<(&Series, Vec<(f64, f64)>)> = series.iter().map(|s| (s, smooth(&s.values))).collect();
    let points = lines.iter().flat_map(|(_, p)| p.iter());
    let (mut x1, mut y0, mut y1) = (1.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let episodes = series.first().map_or(0, |s| s.values.len()) as f64;
    x1 = x1.max(episodes);
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    if y1 - y0 < 1e-9 {
        (y0, y1) = (y0 - 0.5, y1 + 0.5);
    }
    let sx = |x: f64| MARGIN + x / x1 * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, WIDTH / 2.0);
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        svg,
        r#"<path d="M{left} {top} V{bottom} H{right}" fill="none" stroke="black"/>"#
    );
    for (value, y) in [(y0, bottom), (y1, top)] {
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{value:.2}</text>"#, left - 4.0, y + 4.0);
    }
    let _ = writeln!(svg, r#"<text x="{left}" y="{}" text-anchor="middle">0</text>"#, bottom + 16.0);
    let _ = writeln!(svg, r#"<text x="{right}" y="{}" text-anchor="middle">{x1:.0}</text>"#, bottom + 16.0);
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">episode</text>"#, WIDTH / 2.0, HEIGHT - 12.0);

    let mut legend_y = top;
    for (i, (s, pts)) in lines.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let is_mean = s.label == "mean";
        let color = if is_mean { "black" } else { COLORS[i % COLORS.len()] };
        let width = if is_mean { 2.5 } else { 1.0 };
        let opacity = if is_mean { 1.0 } else { 0.6 };
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="{width}" stroke-opacity="{opacity}"/>"#,
            coords.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            right + 4.0,
            legend_y + 4.0,
            s.label
        );
        legend_y += 16.0;
    }
    svg.push_str("</svg>\n");
    svg
}
