//! Minimal deterministic SVG line charts for learning curves.

use std::path::Path;

use crate::error::{Error, Result};

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 600.0;
const MARGIN_LEFT: f64 = 78.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 32.0;
const MARGIN_BOTTOM: f64 = 58.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Renders a line chart to an SVG string. Byte output is a pure function
/// of the input series.
pub fn render_svg(series: &[(String, Vec<(f64, f64)>)]) -> Result<String> {
    if series.is_empty() {
        return Err(Error::Param("svg chart needs at least one series".into()));
    }
    for (label, points) in series {
        if points.is_empty() {
            return Err(Error::Param(format!("series `{label}` has no points")));
        }
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for (_, points) in series {
        for &(x, y) in points {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = move |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = move |y: f64| MARGIN_TOP + plot_h - (y - y0) / (y1 - y0) * plot_h;

    let mut svg = String::with_capacity(16 * 1024);
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // axes
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        fmt(MARGIN_LEFT),
        fmt(MARGIN_TOP + plot_h),
        fmt(MARGIN_LEFT + plot_w),
        fmt(MARGIN_TOP + plot_h),
    ));
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        fmt(MARGIN_LEFT),
        fmt(MARGIN_TOP),
        fmt(MARGIN_LEFT),
        fmt(MARGIN_TOP + plot_h),
    ));

    // ticks and grid
    for i in 0..=5 {
        let fx = x0 + (x1 - x0) * i as f64 / 5.0;
        let px = sx(fx);
        svg.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n",
            fmt(px),
            fmt(MARGIN_TOP + plot_h),
            fmt(MARGIN_TOP + plot_h + 6.0),
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
            fmt(px),
            fmt(MARGIN_TOP + plot_h + 20.0),
            fmt_tick(fx),
        ));
        let fy = y0 + (y1 - y0) * i as f64 / 5.0;
        let py = sy(fy);
        svg.push_str(&format!(
            "<line x1=\"{1}\" y1=\"{0}\" x2=\"{2}\" y2=\"{0}\" stroke=\"black\"/>\n",
            fmt(py),
            fmt(MARGIN_LEFT - 6.0),
            fmt(MARGIN_LEFT),
        ));
        svg.push_str(&format!(
            "<line x1=\"{1}\" y1=\"{0}\" x2=\"{2}\" y2=\"{0}\" stroke=\"#dddddd\"/>\n",
            fmt(py),
            fmt(MARGIN_LEFT),
            fmt(MARGIN_LEFT + plot_w),
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">{}</text>\n",
            fmt(MARGIN_LEFT - 10.0),
            fmt(py + 4.0),
            fmt_tick(fy),
        ));
    }

    // axis labels
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\">episode</text>\n",
        fmt(MARGIN_LEFT + plot_w / 2.0),
        fmt(HEIGHT - 12.0),
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{0}\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 {0})\">mean return</text>\n",
        fmt(MARGIN_TOP + plot_h / 2.0),
    ));

    // series
    for (i, (label, points)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = points.iter().map(|&(x, y)| format!("{},{}", fmt(sx(x)), fmt(sy(y)))).collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            coords.join(" ")
        ));
        let ly = MARGIN_TOP + 16.0 + 18.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{color}\" stroke-width=\"3\"/>\n",
            fmt(WIDTH - MARGIN_RIGHT + 12.0),
            fmt(ly - 4.0),
            fmt(WIDTH - MARGIN_RIGHT + 34.0),
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\">{}</text>\n",
            fmt(WIDTH - MARGIN_RIGHT + 40.0),
            fmt(ly),
            xml_escape(label),
        ));
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Writes a chart to disk; identical input yields byte-identical files.
pub fn emit_svg(series: &[(String, Vec<(f64, f64)>)], path: &Path) -> Result<()> {
    let svg = render_svg(series)?;
    std::fs::write(path, svg)?;
    Ok(())
}

fn fmt(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.').to_string();
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1000.0 {
        format!("{:.0}", v)
    } else {
        fmt(v)
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
