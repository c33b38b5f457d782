//! SVG drawings of planar networks.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::bounding_box;
use crate::network::{Role, WeightedDigraph};
use crate::scalar::Scalar;

const CANVAS: f64 = 600.0;
const MARGIN: f64 = 40.0;
const MAX_STROKE: f64 = 10.0;
const TERMINAL_R: f64 = 9.0;
const JUNCTION_R: f64 = 3.0;

/// Terminals as labeled disks, edges as arrows whose stroke width is
/// proportional to `m_e^{1/q}`.
pub fn render_svg<T: Scalar>(g: &WeightedDigraph<T>, q: T) -> Result<String> {
    if g.dimension != 2 {
        return Err(Error::NotPlanar(g.dimension));
    }
    if g.vertices.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let pos: Vec<[f64; 2]> = g
        .vertices
        .iter()
        .map(|v| [v.position[0].to_f64_lossy(), v.position[1].to_f64_lossy()])
        .collect();
    let (lo, hi) = bounding_box(pos.iter().map(|p| p.as_slice()), 2);
    let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let s = (CANVAS - 2.0 * MARGIN) / extent;
    // y grows downwards in SVG
    let xy = |p: &[f64; 2]| (MARGIN + (p[0] - lo[0]) * s, CANVAS - MARGIN - (p[1] - lo[1]) * s);

    let inv = 1.0 / q.to_f64_lossy();
    let widths: Vec<f64> = g.edges.iter().map(|e| e.weight.to_f64_lossy().powf(inv)).collect();
    let wmax = widths.iter().cloned().fold(0.0, f64::max).max(1e-300);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" height="{CANVAS}" viewBox="0 0 {CANVAS} {CANVAS}">"#
    );
    svg.push_str(
        r##"<defs><marker id="arrow" viewBox="0 0 10 10" refX="8" refY="5" markerWidth="4" markerHeight="4" orient="auto-start-reverse"><path d="M 0 0 L 10 5 L 0 10 z" fill="#333"/></marker></defs>
<rect width="100%" height="100%" fill="white"/>
"##,
    );
    for (e, w) in g.edges.iter().zip(&widths) {
        let (x1, y1) = xy(&pos[e.tail]);
        let (mut x2, mut y2) = xy(&pos[e.head]);
        // stop at the rim of the head's disk so the arrowhead stays visible
        let rim = if g.vertices[e.head].role.is_terminal() { TERMINAL_R } else { JUNCTION_R } + 2.0;
        let len = ((x2 - x1).powi(2) + (y2 - y1).powi(2)).sqrt();
        if len > 2.0 * rim {
            x2 -= (x2 - x1) * rim / len;
            y2 -= (y2 - y1) * rim / len;
        }
        let width = (MAX_STROKE * w / wmax).max(0.5);
        let _ = writeln!(
            svg,
            r##"<line class="edge" x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke="#333" stroke-width="{width:.3}" stroke-linecap="round" marker-end="url(#arrow)"><title>m = {}</title></line>"##,
            e.weight
        );
    }
    for (v, p) in g.vertices.iter().zip(&pos) {
        let (x, y) = xy(p);
        let (label, fill) = match v.role {
            Role::Source(i) => (format!("+{i}"), "#c0392b"),
            Role::Sink(j) => (format!("−{j}"), "#2471a3"),
            Role::Free(_) | Role::Steiner(_) => {
                let _ = writeln!(svg, r##"<circle class="junction" cx="{x:.3}" cy="{y:.3}" r="{JUNCTION_R}" fill="#555"/>"##);
                continue;
            }
        };
        let _ = writeln!(
            svg,
            r#"<circle class="terminal" cx="{x:.3}" cy="{y:.3}" r="{TERMINAL_R}" fill="{fill}"/><text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="14">{label}</text>"#,
            x + 11.0,
            y - 11.0
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn render<T: Scalar>(g: &WeightedDigraph<T>, q: T, path: &Path) -> Result<()> {
    let svg = render_svg(g, q)?;
    std::fs::write(path, svg).map_err(|e| Error::Io(e.to_string()))
}
