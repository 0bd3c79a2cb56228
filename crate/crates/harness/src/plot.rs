//! Standalone SVG of the metric against the population size.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{io_err, HarnessError, Result};
use crate::metrics::MetricRow;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];

/// λ on a linear x axis, `sp_metric` on a log-scaled y axis. Every `(function, d)`
/// pair is its own series. Rows without a metric are drawn as red crosses
/// on the bottom axis.
pub fn render_svg(rows: &[MetricRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(HarnessError::EmptyInput);
    }
    let lam_min = rows.iter().map(|r| r.lambda).min().unwrap() as f64;
    let lam_max = rows.iter().map(|r| r.lambda).max().unwrap() as f64;
    let (lam_lo, lam_hi) = if lam_max > lam_min {
        let pad = 0.05 * (lam_max - lam_min);
        (lam_min - pad, lam_max + pad)
    } else {
        (lam_min - 1.0, lam_max + 1.0)
    };
    let values: Vec<f64> = rows.iter().filter_map(|r| r.sp_metric).filter(|v| *v > 0.0).collect();
    let (dec_lo, dec_hi) = if values.is_empty() {
        (0, 1)
    } else {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min).log10().floor() as i32;
        let hi = values.iter().copied().fold(0.0, f64::max).log10().ceil() as i32;
        (lo, hi.max(lo + 1))
    };

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |l: f64| LEFT + (l - lam_lo) / (lam_hi - lam_lo) * plot_w;
    let sy = |v: f64| {
        TOP + plot_h - (v.log10() - dec_lo as f64) / (dec_hi - dec_lo) as f64 * plot_h
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );

    for e in dec_lo..=dec_hi {
        let y = sy(10f64.powi(e));
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            LEFT + plot_w
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{e}</text>"#,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let mut lambdas: Vec<usize> = rows.iter().map(|r| r.lambda).collect();
    lambdas.sort_unstable();
    lambdas.dedup();
    for l in &lambdas {
        let x = sx(*l as f64);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{l}</text>"#,
            TOP + plot_h + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">population size λ</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">evaluations / success rate</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    let mut series: Vec<(String, Vec<&MetricRow>)> = Vec::new();
    for r in rows {
        let key = format!("{} d={}", r.function, r.d);
        match series.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => series.push((key, vec![r])),
        }
    }
    for (i, (key, mut members)) in series.into_iter().enumerate() {
        members.sort_by_key(|r| r.lambda);
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<(f64, f64)> = members
            .iter()
            .filter_map(|r| r.sp_metric.filter(|v| *v > 0.0).map(|v| (sx(r.lambda as f64), sy(v))))
            .collect();
        if pts.len() > 1 {
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}"/>"#,
                path.join(" ")
            );
        }
        for (x, y) in &pts {
            let _ = writeln!(
                s,
                r#"<circle class="point" cx="{x:.2}" cy="{y:.2}" r="4" fill="{color}"/>"#
            );
        }
        for r in members.iter().filter(|r| r.failed()) {
            let x = sx(r.lambda as f64);
            let y = TOP + plot_h;
            let _ = writeln!(
                s,
                r##"<path class="failure" d="M{:.2},{:.2} L{:.2},{:.2} M{:.2},{:.2} L{:.2},{:.2}" stroke="#d62728" stroke-width="2"/>"##,
                x - 5.0,
                y - 5.0,
                x + 5.0,
                y + 5.0,
                x - 5.0,
                y + 5.0,
                x + 5.0,
                y - 5.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" fill="{color}">{}</text>"#,
            LEFT + plot_w - 8.0,
            TOP + 16.0 + 14.0 * i as f64,
            escape(&key)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_plot(rows: &[MetricRow], path: &Path) -> Result<()> {
    let svg = render_svg(rows)?;
    std::fs::write(path, svg).map_err(io_err(path))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
