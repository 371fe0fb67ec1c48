//! Planar tilings of the input box by region polygons, and their SVG rendering.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::Serialize;

use crate::affine::{affine_piece, atomic_decomposition, AffinePiece};
use crate::bounds::lipschitz_config_bound;
use crate::error::{Error, Result};
use crate::net::{Configuration, NetworkSpec};
use crate::polygon::{clip_line_to_box, polygon_of_region_2d, Point, Polygon};
use crate::region::{BoundingBox, Halfspace, RegionTree};

const AREA_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TilingRegion {
    pub configuration: Configuration,
    pub polygon: Polygon,
    pub area: f64,
    pub affine: AffinePiece,
    /// Atoms with a non-zero coefficient.
    pub atoms: usize,
    /// Per-region weight-magnitude bound; `None` when the network is too shallow for it.
    pub lipschitz_bound: Option<f64>,
}

/// A boundary segment between regions; `layer` 1 marks a first-layer hyperplane.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Boundary {
    pub layer: usize,
    pub from: Point,
    pub to: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TilingDocument {
    #[serde(rename = "box")]
    pub domain: BoundingBox,
    pub regions: Vec<TilingRegion>,
    pub boundaries: Vec<Boundary>,
}

fn on_line(h: &Halfspace, p: Point, scale: f64) -> bool {
    let norm = h.normal.iter().map(|v| v * v).sum::<f64>().sqrt();
    norm > 0.0 && h.value(&p).abs() <= 1e-9 * norm * scale
}

fn on_box_face(domain: &BoundingBox, p: Point, q: Point, scale: f64) -> bool {
    let eps = 1e-12 * scale;
    (0..2).any(|axis| {
        [domain.lo[axis], domain.hi[axis]]
            .iter()
            .any(|&f| (p[axis] - f).abs() <= eps && (q[axis] - f).abs() <= eps)
    })
}

fn segment_key(a: Point, b: Point) -> [i64; 4] {
    let q = |v: f64| (v * 1e6).round() as i64;
    let (ka, kb) = ([q(a[0]), q(a[1])], [q(b[0]), q(b[1])]);
    let (s, t) = if ka <= kb { (ka, kb) } else { (kb, ka) };
    [s[0], s[1], t[0], t[1]]
}

/// Collect every full-depth region with interior as a polygon, together with
/// its affine piece. Fails unless the polygon areas add up to the box area.
pub fn build_tiling(net: &NetworkSpec, tree: &RegionTree) -> Result<TilingDocument> {
    let domain = tree.root().constraints.domain.clone();
    if domain.dim() != 2 || net.input_dim() != 2 {
        return Err(Error::Unsupported(format!(
            "tilings need a 2-dimensional input space, got {}",
            net.input_dim()
        )));
    }
    let scale = domain
        .lo
        .iter()
        .chain(&domain.hi)
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let mut regions = Vec::new();
    let mut boundaries = Vec::new();
    let mut seen = BTreeSet::new();
    for node in tree.leaves() {
        let polygon = polygon_of_region_2d(&node.constraints)?;
        let affine = affine_piece(net, &node.prefix)?;
        let atoms = atomic_decomposition(net, &node.prefix)?.nonzero_count();
        let lipschitz_bound = match lipschitz_config_bound(net, &node.prefix) {
            Ok(report) => Some(report.value),
            Err(Error::Unsupported(_)) => None,
            Err(e) => return Err(e),
        };
        for (p, q) in polygon.edges() {
            if on_box_face(&domain, p, q, scale) {
                continue;
            }
            let lines: Vec<&Halfspace> = node
                .constraints
                .halfspaces
                .iter()
                .filter(|h| on_line(h, p, scale) && on_line(h, q, scale))
                .collect();
            // first-layer lines are drawn whole below
            if lines.is_empty() || lines.iter().any(|h| h.layer == 1) {
                continue;
            }
            let layer = lines.iter().map(|h| h.layer).min().unwrap_or(2);
            if seen.insert(segment_key(p, q)) {
                boundaries.push(Boundary {
                    layer,
                    from: p,
                    to: q,
                });
            }
        }
        regions.push(TilingRegion {
            configuration: node.prefix.clone(),
            area: polygon.area(),
            polygon,
            affine,
            atoms,
            lipschitz_bound,
        });
    }
    let total: f64 = regions.iter().map(|r| r.area).sum();
    let expected = domain.volume();
    if ((total - expected) / expected).abs() > AREA_TOL {
        return Err(Error::Inconsistent(format!(
            "region areas sum to {total}, box area is {expected}"
        )));
    }
    let first = &net.layers()[0];
    let mut first_lines = Vec::new();
    for i in 0..first.outputs() {
        let w = first.weights().row(i);
        if let Some((from, to)) = clip_line_to_box([w[0], w[1]], first.bias()[i], &domain) {
            first_lines.push(Boundary { layer: 1, from, to });
        }
    }
    first_lines.extend(boundaries);
    Ok(TilingDocument {
        domain,
        regions,
        boundaries: first_lines,
    })
}

const CANVAS_WIDTH: f64 = 640.0;
const FILL: &str = "#ef7c00";

fn first_block_shade(config: &Configuration) -> f64 {
    let block = config.block(0);
    let bits = block.len().min(52);
    let value = block[..bits]
        .iter()
        .fold(0u64, |acc, &b| (acc << 1) | u64::from(b));
    let max = ((1u64 << bits) - 1).max(1);
    0.1 + 0.85 * value as f64 / max as f64
}

/// Render a tiling as SVG 1.1. Regions are filled with an opacity keyed to
/// their first-layer block; first-layer hyperplanes are solid and deeper
/// boundaries dashed. Output depends only on the document.
pub fn render_svg(doc: &TilingDocument) -> String {
    let (lo, hi) = (&doc.domain.lo, &doc.domain.hi);
    let s = CANVAS_WIDTH / (hi[0] - lo[0]);
    let height = s * (hi[1] - lo[1]);
    let map = |p: Point| ((p[0] - lo[0]) * s, (hi[1] - p[1]) * s);
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{CANVAS_WIDTH:.3}\" height=\"{height:.3}\" viewBox=\"0 0 {CANVAS_WIDTH:.3} {height:.3}\">"
    );
    let _ = writeln!(
        out,
        "  <rect x=\"0\" y=\"0\" width=\"{CANVAS_WIDTH:.3}\" height=\"{height:.3}\" fill=\"white\"/>"
    );
    out.push_str("  <g id=\"regions\" stroke=\"none\">\n");
    for region in &doc.regions {
        let mut d = String::new();
        for (i, &p) in region.polygon.vertices.iter().enumerate() {
            let (x, y) = map(p);
            let _ = write!(d, "{}{x:.3} {y:.3} ", if i == 0 { "M" } else { "L" });
        }
        d.push('Z');
        let _ = writeln!(
            out,
            "    <path d=\"{d}\" fill=\"{FILL}\" fill-opacity=\"{:.3}\"><title>{}</title></path>",
            first_block_shade(&region.configuration),
            region.configuration
        );
    }
    out.push_str("  </g>\n  <g id=\"boundaries\" stroke=\"black\" fill=\"none\">\n");
    for b in &doc.boundaries {
        let ((x1, y1), (x2, y2)) = (map(b.from), map(b.to));
        let style = if b.layer == 1 {
            "stroke-width=\"1.5\"".to_string()
        } else {
            "stroke-width=\"1\" stroke-dasharray=\"6 4\"".to_string()
        };
        let _ = writeln!(
            out,
            "    <line x1=\"{x1:.3}\" y1=\"{y1:.3}\" x2=\"{x2:.3}\" y2=\"{y2:.3}\" {style}/>"
        );
    }
    let _ = writeln!(
        out,
        "  </g>\n  <rect x=\"0\" y=\"0\" width=\"{CANVAS_WIDTH:.3}\" height=\"{height:.3}\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n</svg>"
    );
    out
}
