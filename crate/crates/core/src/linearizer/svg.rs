//! Two-panel SVG of traced leaves: original coordinates on the left, flat
//! coordinates on the right.

use std::fmt::Write;

use super::grid::Grid;
use super::straight::LeafTrace;

const PANEL: f64 = 400.0;
const MARGIN: f64 = 10.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

struct Frame {
    x0: f64,
    y0: f64,
    scale_x: f64,
    scale_y: f64,
    left: f64,
}

impl Frame {
    fn new(bounds: [f64; 4], left: f64) -> Frame {
        let w = (bounds[1] - bounds[0]).max(f64::MIN_POSITIVE);
        let h = (bounds[3] - bounds[2]).max(f64::MIN_POSITIVE);
        Frame {
            x0: bounds[0],
            y0: bounds[2],
            scale_x: PANEL / w,
            scale_y: PANEL / h,
            left,
        }
    }

    fn map(&self, (x, y): (f64, f64)) -> (f64, f64) {
        (
            self.left + (x - self.x0) * self.scale_x,
            MARGIN + PANEL - (y - self.y0) * self.scale_y,
        )
    }
}

fn bounds(pts: impl Iterator<Item = (f64, f64)>) -> [f64; 4] {
    let mut b = [
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    ];
    for (x, y) in pts {
        b[0] = b[0].min(x);
        b[1] = b[1].max(x);
        b[2] = b[2].min(y);
        b[3] = b[3].max(y);
    }
    b
}

fn polyline(out: &mut String, frame: &Frame, pts: &[(f64, f64)]) {
    out.push_str("    <polyline points=\"");
    for (k, &p) in pts.iter().enumerate() {
        let (x, y) = frame.map(p);
        if k > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{x:.2},{y:.2}");
    }
    out.push_str("\"/>\n");
}

/// Renders every leaf; `names` labels the foliation groups.
pub fn render(grid: &Grid, leaves: &[LeafTrace], names: &[String]) -> String {
    let left = Frame::new([grid.x0, grid.x1, grid.y0, grid.y1], MARGIN);
    let uv = bounds(leaves.iter().flat_map(|l| l.uv.iter().copied()));
    let right = Frame::new(uv, 3.0 * MARGIN + PANEL);
    let width = 4.0 * MARGIN + 2.0 * PANEL;
    let height = 2.0 * MARGIN + PANEL;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width} {height}\">"
    );
    for (panel, frame) in [("xy", &left), ("uv", &right)] {
        let _ = writeln!(out, "  <g id=\"{panel}\" fill=\"none\" stroke-width=\"1\">");
        let _ = writeln!(
            out,
            "    <rect x=\"{}\" y=\"{MARGIN}\" width=\"{PANEL}\" height=\"{PANEL}\" stroke=\"#999\"/>",
            frame.left
        );
        for (k, name) in names.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let _ = writeln!(
                out,
                "   <g class=\"foliation\" data-name=\"{name}\" stroke=\"{color}\">"
            );
            for leaf in leaves.iter().filter(|l| l.foliation == k) {
                let pts = if panel == "xy" { &leaf.xy } else { &leaf.uv };
                polyline(&mut out, frame, pts);
            }
            out.push_str("   </g>\n");
        }
        out.push_str("  </g>\n");
    }
    out.push_str("</svg>\n");
    out
}
