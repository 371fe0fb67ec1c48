//! Planar region polygons by halfspace clipping.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::region::{BoundingBox, ConstraintSystem};

pub type Point = [f64; 2];

/// A convex polygon with counterclockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

impl Polygon {
    /// Signed shoelace area; positive for counterclockwise order.
    pub fn area(&self) -> f64 {
        let v = &self.vertices;
        let n = v.len();
        (0..n)
            .map(|i| {
                let (a, b) = (v[i], v[(i + 1) % n]);
                a[0] * b[1] - b[0] * a[1]
            })
            .sum::<f64>()
            / 2.0
    }

    pub fn centroid(&self) -> Point {
        let v = &self.vertices;
        let n = v.len();
        let (mut cx, mut cy, mut a2) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let (p, q) = (v[i], v[(i + 1) % n]);
            let cross = p[0] * q[1] - q[0] * p[1];
            a2 += cross;
            cx += (p[0] + q[0]) * cross;
            cy += (p[1] + q[1]) * cross;
        }
        [cx / (3.0 * a2), cy / (3.0 * a2)]
    }

    /// Edges as consecutive vertex pairs, closing back to the first vertex.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }
}

/// Keep the part of `poly` where `normal·x + offset ≤ 0` (Sutherland–Hodgman step).
pub fn clip_halfplane(poly: &[Point], normal: [f64; 2], offset: f64) -> Vec<Point> {
    let f = |p: &Point| normal[0] * p[0] + normal[1] * p[1] + offset;
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let cur = poly[i];
        let next = poly[(i + 1) % n];
        let (fc, fn_) = (f(&cur), f(&next));
        if fc <= 0.0 {
            out.push(cur);
        }
        if (fc < 0.0 && fn_ > 0.0) || (fc > 0.0 && fn_ < 0.0) {
            let s = fc / (fc - fn_);
            out.push([
                cur[0] + s * (next[0] - cur[0]),
                cur[1] + s * (next[1] - cur[1]),
            ]);
        }
    }
    out
}

fn dedup(points: Vec<Point>, scale: f64) -> Vec<Point> {
    let eps = 1e-12 * scale;
    let mut out: Vec<Point> = Vec::with_capacity(points.len());
    for p in points {
        if out
            .last()
            .is_none_or(|q| (p[0] - q[0]).abs() > eps || (p[1] - q[1]).abs() > eps)
        {
            out.push(p);
        }
    }
    while out.len() > 1 {
        let (f, l) = (out[0], out[out.len() - 1]);
        if (f[0] - l[0]).abs() <= eps && (f[1] - l[1]).abs() <= eps {
            out.pop();
        } else {
            break;
        }
    }
    out
}

fn box_corners(domain: &BoundingBox) -> Vec<Point> {
    let (lo, hi) = (&domain.lo, &domain.hi);
    vec![
        [lo[0], lo[1]],
        [hi[0], lo[1]],
        [hi[0], hi[1]],
        [lo[0], hi[1]],
    ]
}

/// Clip the bounding box by every halfspace of a planar region. Strict
/// constraints are treated as closed.
pub fn polygon_of_region_2d(cs: &ConstraintSystem) -> Result<Polygon> {
    if cs.domain.dim() != 2 {
        return Err(Error::Unsupported(format!(
            "polygons need a 2-dimensional input space, got {}",
            cs.domain.dim()
        )));
    }
    let scale = cs
        .domain
        .lo
        .iter()
        .chain(&cs.domain.hi)
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let mut poly = box_corners(&cs.domain);
    for h in &cs.halfspaces {
        match h.constant_verdict() {
            Some(true) => continue,
            Some(false) => {
                poly.clear();
                break;
            }
            None => {}
        }
        let sign = if h.strict { -1.0 } else { 1.0 };
        poly = clip_halfplane(
            &poly,
            [sign * h.normal[0], sign * h.normal[1]],
            sign * h.offset,
        );
        poly = dedup(poly, scale);
        if poly.len() < 3 {
            break;
        }
    }
    let polygon = Polygon { vertices: poly };
    if polygon.vertices.len() < 3 || polygon.area() <= 0.0 {
        return Err(Error::Validation(format!(
            "region {} has no interior inside the box",
            cs.source
        )));
    }
    Ok(polygon)
}

/// The part of the line `normal·x + offset = 0` inside the box, if any.
pub fn clip_line_to_box(
    normal: [f64; 2],
    offset: f64,
    domain: &BoundingBox,
) -> Option<(Point, Point)> {
    if normal[0] == 0.0 && normal[1] == 0.0 {
        return None;
    }
    // parametrize the line as base + s * dir
    let nn = normal[0] * normal[0] + normal[1] * normal[1];
    let base = [-offset * normal[0] / nn, -offset * normal[1] / nn];
    let dir = [-normal[1], normal[0]];
    let (mut s_min, mut s_max) = (f64::NEG_INFINITY, f64::INFINITY);
    for axis in 0..2 {
        let (lo, hi) = (domain.lo[axis], domain.hi[axis]);
        if dir[axis] == 0.0 {
            if base[axis] < lo || base[axis] > hi {
                return None;
            }
        } else {
            let a = (lo - base[axis]) / dir[axis];
            let b = (hi - base[axis]) / dir[axis];
            s_min = s_min.max(a.min(b));
            s_max = s_max.min(a.max(b));
        }
    }
    (s_max > s_min).then(|| {
        (
            [base[0] + s_min * dir[0], base[1] + s_min * dir[1]],
            [base[0] + s_max * dir[0], base[1] + s_max * dir[1]],
        )
    })
}
