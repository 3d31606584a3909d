//! Minimal deterministic SVG line charts: a polyline through the series,
//! axis ticks with labels, and dashed vertical reference markers.
//! Identical specs produce identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::report::{atomic_write, ReportError};

#[derive(Debug, Error)]
pub enum ChartError {
    #[error("chart `{0}` has no points")]
    EmptySeries(String),
    #[error("chart `{0}`: series x values must be strictly increasing")]
    UnsortedSeries(String),
    #[error(transparent)]
    Write(#[from] ReportError),
}

#[derive(Debug, Clone)]
pub struct ChartSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<(f64, f64)>,
    /// X positions of dashed vertical reference lines.
    pub markers: Vec<f64>,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 60.0;
const TICKS: usize = 5;

fn fmt_coord(v: f64) -> String {
    format!("{v:.2}")
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the chart and writes it atomically to `out_path`.
pub fn emit_chart(spec: &ChartSpec, out_path: &Path) -> Result<PathBuf, ChartError> {
    if spec.series.is_empty() {
        return Err(ChartError::EmptySeries(spec.title.clone()));
    }
    if spec.series.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(ChartError::UnsortedSeries(spec.title.clone()));
    }
    let (x_min, x_max) = (
        spec.series.first().unwrap().0,
        spec.series.last().unwrap().0,
    );
    let y_min = spec.series.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let y_max = spec
        .series
        .iter()
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max);
    // degenerate ranges still render: pad them to a unit span
    let (x_min, x_max) = if x_min == x_max {
        (x_min - 0.5, x_max + 0.5)
    } else {
        (x_min, x_max)
    };
    let (y_min, y_max) = if y_min == y_max {
        (y_min - 0.5, y_max + 0.5)
    } else {
        (y_min, y_max)
    };
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let py = |y: f64| MARGIN_TOP + plot_h - (y - y_min) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(
        svg,
        "  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{}\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"18\">{}</text>",
        fmt_coord(WIDTH / 2.0),
        escape(&spec.title)
    );

    // axes
    let _ = writeln!(
        svg,
        "  <line x1=\"{l}\" y1=\"{t}\" x2=\"{l}\" y2=\"{b}\" stroke=\"black\"/>",
        l = fmt_coord(MARGIN_LEFT),
        t = fmt_coord(MARGIN_TOP),
        b = fmt_coord(MARGIN_TOP + plot_h)
    );
    let _ = writeln!(
        svg,
        "  <line x1=\"{l}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>",
        l = fmt_coord(MARGIN_LEFT),
        r = fmt_coord(MARGIN_LEFT + plot_w),
        b = fmt_coord(MARGIN_TOP + plot_h)
    );

    // ticks and labels
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let xv = x_min + f * (x_max - x_min);
        let yv = y_min + f * (y_max - y_min);
        let xp = px(xv);
        let yp = py(yv);
        let _ = writeln!(
            svg,
            "  <line x1=\"{x}\" y1=\"{b}\" x2=\"{x}\" y2=\"{b2}\" stroke=\"black\"/>",
            x = fmt_coord(xp),
            b = fmt_coord(MARGIN_TOP + plot_h),
            b2 = fmt_coord(MARGIN_TOP + plot_h + 6.0)
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{x}\" y=\"{y}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{v}</text>",
            x = fmt_coord(xp),
            y = fmt_coord(MARGIN_TOP + plot_h + 20.0),
            v = fmt_tick(xv)
        );
        let _ = writeln!(
            svg,
            "  <line x1=\"{l2}\" y1=\"{y}\" x2=\"{l}\" y2=\"{y}\" stroke=\"black\"/>",
            l2 = fmt_coord(MARGIN_LEFT - 6.0),
            l = fmt_coord(MARGIN_LEFT),
            y = fmt_coord(yp)
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{x}\" y=\"{y}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">{v}</text>",
            x = fmt_coord(MARGIN_LEFT - 10.0),
            y = fmt_coord(yp + 4.0),
            v = fmt_tick(yv)
        );
    }

    // axis labels
    let _ = writeln!(
        svg,
        "  <text x=\"{x}\" y=\"{y}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{v}</text>",
        x = fmt_coord(MARGIN_LEFT + plot_w / 2.0),
        y = fmt_coord(HEIGHT - 15.0),
        v = escape(&spec.x_label)
    );
    let _ = writeln!(
        svg,
        "  <text x=\"20\" y=\"{y}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\" transform=\"rotate(-90 20 {y})\">{v}</text>",
        y = fmt_coord(MARGIN_TOP + plot_h / 2.0),
        v = escape(&spec.y_label)
    );

    // dashed vertical markers
    for &m in &spec.markers {
        if m < x_min || m > x_max {
            continue;
        }
        let _ = writeln!(
            svg,
            "  <line x1=\"{x}\" y1=\"{t}\" x2=\"{x}\" y2=\"{b}\" stroke=\"red\" stroke-dasharray=\"6 4\"/>",
            x = fmt_coord(px(m)),
            t = fmt_coord(MARGIN_TOP),
            b = fmt_coord(MARGIN_TOP + plot_h)
        );
    }

    // the data series
    let points: Vec<String> = spec
        .series
        .iter()
        .map(|&(x, y)| format!("{},{}", fmt_coord(px(x)), fmt_coord(py(y))))
        .collect();
    let _ = writeln!(
        svg,
        "  <polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"{}\"/>",
        points.join(" ")
    );
    let _ = writeln!(svg, "</svg>");

    atomic_write(out_path, svg.as_bytes())?;
    Ok(out_path.to_path_buf())
}
