//! Self-contained SVG rendering of a field of extremals: the constraint
//! strip outlined, flow arrows sampled at t = 0 on a uniform grid,
//! trajectories colored by classification (inner blue, right boundary
//! black, left boundary red, paper style), the optimal one drawn heavier,
//! and each labeled with its travelling time to two decimals.

use crate::artifacts::{read_extremal_csv, SummaryForPlot};
use anyhow::Result;
use std::fmt::Write as _;
use zermelo_core::FlowField;

const MARGIN: f64 = 46.0;
const ARROW_GRID_X: usize = 9;
const ARROW_GRID_Y: usize = 13;
/// Plotted polylines are decimated to roughly this many points.
const MAX_POLYLINE_POINTS: usize = 4000;

pub struct PlotInput {
    pub summary: SummaryForPlot,
    pub width: u32,
    pub height: u32,
}

struct Frame {
    x1_range: (f64, f64),
    x2_range: (f64, f64),
    width: f64,
    height: f64,
}

impl Frame {
    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        let sx = (self.width - 2.0 * MARGIN) / (self.x1_range.1 - self.x1_range.0);
        let sy = (self.height - 2.0 * MARGIN) / (self.x2_range.1 - self.x2_range.0);
        (
            MARGIN + (p[0] - self.x1_range.0) * sx,
            // x2 grows upward on the page
            self.height - MARGIN - (p[1] - self.x2_range.0) * sy,
        )
    }
}

fn class_color(classification: &str) -> &'static str {
    match classification {
        "right_boundary" => "black",
        "left_boundary" => "#d62728",
        _ => "#1f77b4",
    }
}

pub fn render(input: &PlotInput, field: &FlowField) -> Result<String> {
    let summary = &input.summary;
    let bound = summary.bound;
    let trajectories: Vec<_> = summary
        .extremals
        .iter()
        .map(|e| read_extremal_csv(&e.csv))
        .collect::<Result<Vec<_>>>()?;

    let mut x2_lo = summary.a[1].min(summary.b[1]);
    let mut x2_hi = summary.a[1].max(summary.b[1]);
    for t in &trajectories {
        for p in &t.points {
            x2_lo = x2_lo.min(p[1]);
            x2_hi = x2_hi.max(p[1]);
        }
    }
    let pad = 0.05 * (x2_hi - x2_lo).max(1.0);
    let frame = Frame {
        x1_range: (-1.25 * bound, 1.25 * bound),
        x2_range: (x2_lo - pad, x2_hi + pad),
        width: input.width as f64,
        height: input.height as f64,
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = frame.width,
        h = frame.height
    );
    let _ = writeln!(
        svg,
        r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#,
        w = frame.width,
        h = frame.height
    );

    // Constraint strip |x1| <= bound.
    let (left_top_x, top_y) = frame.map([-bound, frame.x2_range.1]);
    let (right_top_x, _) = frame.map([bound, frame.x2_range.1]);
    let (_, bottom_y) = frame.map([-bound, frame.x2_range.0]);
    let _ = writeln!(
        svg,
        r##"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="#f4f6f8" stroke="none"/>"##,
        x = left_top_x,
        y = top_y,
        w = right_top_x - left_top_x,
        h = bottom_y - top_y
    );
    for side in [-bound, bound] {
        let (x, y0) = frame.map([side, frame.x2_range.1]);
        let (_, y1) = frame.map([side, frame.x2_range.0]);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y1:.2}" stroke="#555" stroke-width="1.5" stroke-dasharray="7 4"/>"##
        );
    }

    // Flow arrows at t = 0.
    let mut max_speed = 0.0_f64;
    let mut arrows = Vec::new();
    for i in 0..ARROW_GRID_X {
        for j in 0..ARROW_GRID_Y {
            let x1 = -bound + 2.0 * bound * (i as f64 + 0.5) / ARROW_GRID_X as f64;
            let x2 = frame.x2_range.0
                + (frame.x2_range.1 - frame.x2_range.0) * (j as f64 + 0.5) / ARROW_GRID_Y as f64;
            if let Ok(v) = field.velocity(0.0, [x1, x2]) {
                max_speed = max_speed.max((v[0] * v[0] + v[1] * v[1]).sqrt());
                arrows.push(([x1, x2], v));
            }
        }
    }
    let cell = (frame.width - 2.0 * MARGIN) / ARROW_GRID_X as f64;
    let scale = if max_speed > 0.0 {
        0.8 * cell / max_speed
    } else {
        0.0
    };
    for (p, v) in arrows {
        let (x0, y0) = frame.map(p);
        let dx = v[0] * scale;
        let dy = -v[1] * scale;
        let len = (dx * dx + dy * dy).sqrt();
        if len < 0.75 {
            let _ = writeln!(
                svg,
                r##"<circle cx="{x0:.2}" cy="{y0:.2}" r="0.8" fill="#999"/>"##
            );
            continue;
        }
        let (x1, y1) = (x0 + dx, y0 + dy);
        let (ux, uy) = (dx / len, dy / len);
        let head = (2.6_f64).min(0.35 * len);
        let _ = writeln!(
            svg,
            r##"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y1:.2}" stroke="#999" stroke-width="1"/>"##
        );
        let _ = writeln!(
            svg,
            r##"<path d="M {x1:.2} {y1:.2} L {ax:.2} {ay:.2} L {bx:.2} {by:.2} Z" fill="#999"/>"##,
            ax = x1 - head * (ux + 0.5 * uy),
            ay = y1 - head * (uy - 0.5 * ux),
            bx = x1 - head * (ux - 0.5 * uy),
            by = y1 - head * (uy + 0.5 * ux),
        );
    }

    // Trajectories, optimal last so it draws on top.
    let mut order: Vec<usize> = (0..trajectories.len()).collect();
    if let Some(opt) = summary.optimal_index {
        order.retain(|&i| i != opt);
        order.push(opt);
    }
    for idx in order {
        let meta = &summary.extremals[idx];
        let points = &trajectories[idx].points;
        if points.is_empty() {
            continue;
        }
        let stride = (points.len() / MAX_POLYLINE_POINTS).max(1);
        let mut path = String::new();
        for (k, p) in points
            .iter()
            .step_by(stride)
            .chain(std::iter::once(points.last().unwrap()))
            .enumerate()
        {
            let (x, y) = frame.map(*p);
            let _ = write!(path, "{}{x:.2} {y:.2}", if k == 0 { "M " } else { " L " });
        }
        let optimal = summary.optimal_index == Some(idx);
        let color = class_color(&meta.classification);
        let width = if optimal { 2.6 } else { 1.3 };
        let _ = writeln!(
            svg,
            r#"<path d="{path}" fill="none" stroke="{color}" stroke-width="{width}"/>"#
        );
        // Travelling-time label near the two-thirds point of the path.
        let label_at = points[(points.len() * 2 / 3).min(points.len() - 1)];
        let (lx, ly) = frame.map(label_at);
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{ly:.2}" font-family="sans-serif" font-size="13" fill="{color}"{weight}>{t:.2}</text>"#,
            x = lx + 6.0,
            t = meta.travel_time,
            weight = if optimal {
                r#" font-weight="bold""#
            } else {
                ""
            },
        );
    }

    // Endpoints.
    for (p, name) in [(summary.a, "A"), (summary.b, "B")] {
        let (x, y) = frame.map(p);
        let _ = writeln!(
            svg,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.2" fill="black"/>"#
        );
        let _ = writeln!(
            svg,
            r#"<text x="{tx:.2}" y="{ty:.2}" font-family="sans-serif" font-size="14">{name}</text>"#,
            tx = x + 7.0,
            ty = y - 6.0
        );
    }

    if summary.extremals.is_empty() {
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="16" text-anchor="middle">no extremals</text>"#,
            x = frame.width / 2.0,
            y = frame.height / 2.0
        );
    }

    // Field annotation; the arrows show t = 0 only, so time-varying
    // fields carry their formulas.
    let annotation = if field.is_time_varying() {
        format!("{} (arrows at t=0)", summary.field_description)
    } else {
        summary.field_description.clone()
    };
    let _ = writeln!(
        svg,
        r##"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="12" fill="#333">{text}</text>"##,
        x = MARGIN,
        y = frame.height - 14.0,
        text = xml_escape(&annotation)
    );

    svg.push_str("</svg>\n");
    Ok(svg)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
