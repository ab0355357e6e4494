//! Diagnostic plot: one OSD trajectory per observation across the sequence
//! of projections, rendered as static SVG.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequencer::GpMatrix;

/// Categorical palette, repeated when there are more than eight labels.
pub const PALETTE: [&str; 8] = [
    "#0072B2", "#D55E00", "#009E73", "#CC79A7", "#E69F00", "#56B4E9", "#F0E442", "#999999",
];
pub const UNIFORM_COLOR: &str = "#0072B2";
pub const HIGHLIGHT_COLOR: &str = "#000000";

/// Above this many points the trajectories are decimated.
pub const MAX_POINTS: usize = 5_000_000;

/// Values at or below this are drawn as touching zero when decimating.
const ZERO_TOUCH: f64 = 1e-8;

const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub width: u32,
    pub height: u32,
    pub line_alpha: f64,
    /// Rows drawn last in [`HIGHLIGHT_COLOR`].
    pub highlight: Vec<usize>,
    pub x_label: String,
    pub y_label: String,
}

impl Default for PlotSpec {
    fn default() -> Self {
        Self {
            width: 900,
            height: 500,
            line_alpha: 0.6,
            highlight: Vec::new(),
            x_label: "projection index".into(),
            y_label: "OSD".into(),
        }
    }
}

impl PlotSpec {
    pub fn validate(&self, n: usize) -> Result<()> {
        let min_w = (MARGIN_LEFT + MARGIN_RIGHT) as u32 + 1;
        let min_h = (MARGIN_TOP + MARGIN_BOTTOM) as u32 + 1;
        if self.width < min_w || self.height < min_h {
            return Err(Error::InvalidConfig(format!(
                "plot needs at least {min_w}×{min_h} pixels, got {}×{}",
                self.width, self.height
            )));
        }
        if !(0.0..=1.0).contains(&self.line_alpha) {
            return Err(Error::InvalidConfig(format!(
                "line alpha must lie in [0, 1], got {}",
                self.line_alpha
            )));
        }
        if let Some(&i) = self.highlight.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidConfig(format!(
                "highlighted row {i} out of range for {n} observations"
            )));
        }
        Ok(())
    }
}

/// Tick positions at 1, 2 or 5 times a power of ten covering `[0, max]`.
fn nice_ticks(max: f64, target: usize) -> Vec<f64> {
    let raw = max / target.max(1) as f64;
    let magnitude = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * magnitude)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * magnitude);
    let count = (max / step + 1e-9).floor() as usize;
    (0..=count).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders the GP matrix; colours follow the first appearance of each
/// distinct label.
pub fn diagnostic_svg(gp: &GpMatrix, labels: Option<&[String]>, spec: &PlotSpec) -> Result<String> {
    let values = gp.values();
    let (n, m) = values.shape();
    if n == 0 || m == 0 {
        return Err(Error::InvalidData("GP matrix is empty".into()));
    }
    spec.validate(n)?;
    if let Some(l) = labels {
        if l.len() != n {
            return Err(Error::InvalidData(format!(
                "{} labels for {n} observations",
                l.len()
            )));
        }
    }

    let mut classes: Vec<&str> = Vec::new();
    let class_of: Vec<Option<usize>> = match labels {
        Some(l) => l
            .iter()
            .map(|s| {
                Some(classes.iter().position(|c| c == s).unwrap_or_else(|| {
                    classes.push(s);
                    classes.len() - 1
                }))
            })
            .collect(),
        None => vec![None; n],
    };

    let max = values.max();
    let y_max = if max > 0.0 { max * 1.05 } else { 1.0 };
    let (w, h) = (f64::from(spec.width), f64::from(spec.height));
    let plot_w = w - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = h - MARGIN_TOP - MARGIN_BOTTOM;
    let x_of = |j: usize| {
        if m == 1 {
            MARGIN_LEFT + plot_w / 2.0
        } else {
            MARGIN_LEFT + plot_w * j as f64 / (m - 1) as f64
        }
    };
    let y_of = |v: f64| MARGIN_TOP + plot_h * (1.0 - v / y_max);

    // Decimation keeps every `stride`-th projection, the last one, and each
    // observation's own zero-touching projections.
    let stride = if n * m > MAX_POINTS {
        (n * m).div_ceil(MAX_POINTS)
    } else {
        1
    };

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        spec.width, spec.height, spec.width, spec.height
    );
    if stride > 1 {
        let _ = writeln!(
            svg,
            "<!-- downsampled: one point per {stride} projections plus zero-touching points -->"
        );
    }
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);

    // Axes, ticks and labels.
    let (x0, x1) = (MARGIN_LEFT, MARGIN_LEFT + plot_w);
    let (y0, y1) = (MARGIN_TOP + plot_h, MARGIN_TOP);
    let _ = writeln!(svg, r#"<g id="axes" stroke="black" stroke-width="1" fill="none">"#);
    let _ = writeln!(svg, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}"/>"#);
    let _ = writeln!(svg, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}"/>"#);
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(
        svg,
        r#"<g id="ticks" font-family="sans-serif" font-size="11" fill="black">"#
    );
    for t in nice_ticks(y_max, 5) {
        let y = y_of(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            y + 4.0,
            tick_label(t)
        );
    }
    // Projection indices are 1-based; tick at 1 and at multiples of the step.
    let x_ticks = std::iter::once(1).chain(
        nice_ticks(m as f64, 8)
            .into_iter()
            .map(|t| t.round() as usize)
            .filter(|&t| t > 1 && t <= m),
    );
    for index in x_ticks {
        let x = x_of(index - 1);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{index}</text>"#,
            y0 + 5.0,
            y0 + 18.0,
        );
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        h - 12.0,
        escape(&spec.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(&spec.y_label)
    );

    let highlighted: Vec<bool> = {
        let mut v = vec![false; n];
        for &i in &spec.highlight {
            v[i] = true;
        }
        v
    };
    let order = (0..n)
        .filter(|&i| !highlighted[i])
        .chain((0..n).filter(|&i| highlighted[i]));
    let _ = writeln!(
        svg,
        r#"<g id="trajectories" fill="none" stroke-width="1" stroke-opacity="{}">"#,
        tick_label(spec.line_alpha)
    );
    for i in order {
        let (color, width) = if highlighted[i] {
            (HIGHLIGHT_COLOR, 2)
        } else {
            let c = class_of[i].map_or(UNIFORM_COLOR, |c| PALETTE[c % PALETTE.len()]);
            (c, 1)
        };
        let mut points = String::new();
        for j in 0..m {
            let v = values[(i, j)];
            if stride > 1 && j % stride != 0 && j != m - 1 && v > ZERO_TOUCH {
                continue;
            }
            if !points.is_empty() {
                points.push(' ');
            }
            let _ = write!(points, "{:.2},{:.2}", x_of(j), y_of(v));
        }
        let _ = writeln!(
            svg,
            r#"<polyline data-row="{i}" stroke="{color}" stroke-width="{width}" points="{points}"/>"#
        );
    }
    let _ = writeln!(svg, "</g>");

    if !classes.is_empty() {
        let _ = writeln!(
            svg,
            r#"<g id="legend" font-family="sans-serif" font-size="11">"#
        );
        for (c, name) in classes.iter().enumerate() {
            let y = MARGIN_TOP + 10.0 + 14.0 * c as f64;
            let x = x1 - 90.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                x + 16.0,
                PALETTE[c % PALETTE.len()],
                x + 20.0,
                y + 4.0,
                escape(name)
            );
        }
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn ticks_cover_the_range() {
        assert_eq!(nice_ticks(10.5, 5), vec![0.0, 5.0, 10.0]);
        assert_eq!(nice_ticks(9.0, 5), vec![0.0, 2.0, 4.0, 6.0, 8.0]);
        let small: Vec<String> = nice_ticks(0.42, 5).into_iter().map(tick_label).collect();
        assert_eq!(small, vec!["0", "0.1", "0.2", "0.3", "0.4"]);
        assert_eq!(tick_label(2.0), "2");
    }

    #[test]
    fn single_row_gives_one_polyline() {
        let gp = GpMatrix::new(DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 2.0])).unwrap();
        let svg = diagnostic_svg(&gp, None, &PlotSpec::default()).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 1);
        let gp = GpMatrix::new(DMatrix::from_row_slice(1, 1, &[0.0])).unwrap();
        let svg = diagnostic_svg(&gp, None, &PlotSpec::default()).unwrap();
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn highlights_are_drawn_last() {
        let gp = GpMatrix::new(DMatrix::from_fn(4, 5, |i, j| (i + j) as f64)).unwrap();
        let spec = PlotSpec {
            highlight: vec![1],
            ..PlotSpec::default()
        };
        let labels: Vec<String> = ["a", "b", "a", "c"].iter().map(|s| s.to_string()).collect();
        let svg = diagnostic_svg(&gp, Some(&labels), &spec).unwrap();
        let rows: Vec<&str> = svg
            .match_indices("data-row=\"")
            .map(|(p, _)| &svg[p + 10..p + 11])
            .collect();
        assert_eq!(rows, vec!["0", "2", "3", "1"]);
        assert!(svg.contains(&format!(r#"data-row="1" stroke="{HIGHLIGHT_COLOR}""#)));
        assert!(svg.contains(&format!(r#"data-row="3" stroke="{}""#, PALETTE[2])));
    }

    #[test]
    fn invalid_inputs() {
        let gp = GpMatrix::new(DMatrix::from_element(3, 2, 1.0)).unwrap();
        let two: Vec<String> = vec!["a".into(), "b".into()];
        assert!(matches!(
            diagnostic_svg(&gp, Some(&two), &PlotSpec::default()),
            Err(Error::InvalidData(_))
        ));
        let bad = PlotSpec {
            width: 0,
            ..PlotSpec::default()
        };
        assert!(diagnostic_svg(&gp, None, &bad).is_err());
        let bad = PlotSpec {
            highlight: vec![3],
            ..PlotSpec::default()
        };
        assert!(diagnostic_svg(&gp, None, &bad).is_err());
    }

    #[test]
    fn decimation_keeps_zero_touches() {
        let (n, m) = (2, MAX_POINTS / 2 + 1);
        let mut values = DMatrix::from_element(n, m, 1.0);
        values[(0, 7)] = 0.0;
        let gp = GpMatrix::new(values).unwrap();
        let svg = diagnostic_svg(&gp, None, &PlotSpec::default()).unwrap();
        assert!(svg.contains("<!-- downsampled: one point per 2 projections"));
        let first = svg.lines().find(|l| l.contains("data-row=\"0\"")).unwrap();
        let second = svg.lines().find(|l| l.contains("data-row=\"1\"")).unwrap();
        assert_eq!(
            first.matches(',').count(),
            second.matches(',').count() + 1
        );
    }
}
