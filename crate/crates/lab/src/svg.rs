//! Standalone scatter figures: one SVG circle per 2-D sample, colored by
//! condition label, with the task's mode centers drawn as crosses. The
//! canvas is a fixed 800x800 viewBox mapping the data square
//! [-1.6, 1.6]^2, and coordinates are written with two decimals, well
//! inside half-pixel quantization.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::{LabError, LabResult};

pub const VIEW_PX: f64 = 800.0;
pub const AXIS_RANGE: f64 = 1.6;

/// Mode colors; the label indexes into this cycle, unlabeled points are
/// gray.
const PALETTE: [&str; 10] = [
    "#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
    "#bcbd22", "#7f7f7f",
];
const NULL_COLOR: &str = "#9aa0a6";

/// Data x to pixel x.
pub fn to_px_x(x: f64) -> f64 {
    (x + AXIS_RANGE) / (2.0 * AXIS_RANGE) * VIEW_PX
}

/// Data y to pixel y (the SVG y axis points down).
pub fn to_px_y(y: f64) -> f64 {
    (AXIS_RANGE - y) / (2.0 * AXIS_RANGE) * VIEW_PX
}

/// Pixel x back to data x (used by the round-trip check).
pub fn from_px_x(px: f64) -> f64 {
    px / VIEW_PX * 2.0 * AXIS_RANGE - AXIS_RANGE
}

pub fn from_px_y(py: f64) -> f64 {
    AXIS_RANGE - py / VIEW_PX * 2.0 * AXIS_RANGE
}

/// Renders the scatter SVG text.
pub fn scatter_svg(
    points: &[Vec<f64>],
    labels: &[Option<usize>],
    centers: &[[f64; 2]],
) -> LabResult<String> {
    if points.len() != labels.len() {
        return Err(LabError::runtime(format!(
            "scatter: {} points but {} labels",
            points.len(),
            labels.len()
        )));
    }
    for p in points {
        if p.len() != 2 {
            return Err(LabError::runtime(format!(
                "scatter points must be 2-D, got dimension {}",
                p.len()
            )));
        }
    }

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {VIEW_PX:.0} {VIEW_PX:.0}\" \
         width=\"{VIEW_PX:.0}\" height=\"{VIEW_PX:.0}\">"
    );
    let _ = writeln!(out, "<rect width=\"{VIEW_PX:.0}\" height=\"{VIEW_PX:.0}\" fill=\"white\"/>");
    // Coordinate axes through the data origin.
    let mid = VIEW_PX / 2.0;
    let _ = writeln!(
        out,
        "<line x1=\"0\" y1=\"{mid}\" x2=\"{VIEW_PX:.0}\" y2=\"{mid}\" stroke=\"#dddddd\"/>\
         <line x1=\"{mid}\" y1=\"0\" x2=\"{mid}\" y2=\"{VIEW_PX:.0}\" stroke=\"#dddddd\"/>"
    );
    // Mode centers as crosses.
    for c in centers {
        let (cx, cy) = (to_px_x(c[0]), to_px_y(c[1]));
        let arm = 7.0;
        let _ = writeln!(
            out,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#333333\" \
             stroke-width=\"2\"/>",
            cx - arm,
            cy,
            cx + arm,
            cy
        );
        let _ = writeln!(
            out,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#333333\" \
             stroke-width=\"2\"/>",
            cx,
            cy - arm,
            cx,
            cy + arm
        );
    }
    for (p, label) in points.iter().zip(labels) {
        let color = match label {
            Some(k) => PALETTE[k % PALETTE.len()],
            None => NULL_COLOR,
        };
        let _ = writeln!(
            out,
            "<circle class=\"pt\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\" \
             fill-opacity=\"0.75\"/>",
            to_px_x(p[0]),
            to_px_y(p[1])
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Writes the scatter SVG to `path`.
pub fn emit_scatter_svg(
    points: &[Vec<f64>],
    labels: &[Option<usize>],
    centers: &[[f64; 2]],
    path: &Path,
) -> LabResult<()> {
    let text = scatter_svg(points, labels, centers)?;
    fs::write(path, text).map_err(|e| LabError::io(path, e))
}

/// Extracts the data-point pixel coordinates back out of a rendered
/// scatter (test support for the round-trip contract).
pub fn parse_scatter_points(svg: &str) -> Vec<(f64, f64)> {
    let mut points = Vec::new();
    for chunk in svg.split("<circle class=\"pt\" ").skip(1) {
        let grab = |key: &str| -> Option<f64> {
            let start = chunk.find(key)? + key.len();
            let rest = &chunk[start..];
            let end = rest.find('"')?;
            rest[..end].parse().ok()
        };
        if let (Some(cx), Some(cy)) = (grab("cx=\""), grab("cy=\"")) {
            points.push((cx, cy));
        }
    }
    points
}
