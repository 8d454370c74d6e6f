use std::collections::HashMap;

use super::{Aabb, Point3, TriMesh, Vec3};
use crate::{Error, Result};

/// Assemblies live on an exact 5 mm grid, so contacts are exact up to rounding.
pub const DEFAULT_CONTACT_TOLERANCE: f64 = 1e-6;

type P2 = [f64; 2];

/// Exterior boundary of a set of closed parts whose interiors are disjoint and
/// which touch only on planar patches.
///
/// Wherever a face of one part lies on a face of another part with the
/// opposite normal (within `contact_tolerance`), the overlapping region is cut
/// out of both faces. Everything else is kept as is. Parts whose bounding boxes
/// overlap by more than the tolerance on every axis are rejected; for the
/// axis-aligned blocks this crate assembles that is exactly interpenetration.
pub fn union_boundary(parts: &[TriMesh], contact_tolerance: f64) -> Result<TriMesh> {
    if !(contact_tolerance >= 0.0) {
        return Err(Error::invalid("contact tolerance must be non-negative"));
    }
    if parts.len() == 1 {
        return Ok(parts[0].clone());
    }
    let boxes: Vec<_> = parts.iter().map(TriMesh::aabb).collect();
    for i in 0..parts.len() {
        for j in i + 1..parts.len() {
            if parts[i].is_empty() || parts[j].is_empty() {
                continue;
            }
            let sep = boxes[i].separation(&boxes[j]);
            if sep < -contact_tolerance {
                return Err(Error::InvalidAssembly(format!(
                    "parts {i} and {j} interpenetrate by {:.6} mm",
                    -sep
                )));
            }
        }
    }

    let mut out = MeshBuilder::default();
    for (pi, part) in parts.iter().enumerate() {
        for f in 0..part.len() {
            let tri = part.triangle(f);
            let n = part.normals()[f];
            let opposing = opposing_faces(parts, &boxes, pi, &tri, &n, contact_tolerance);
            if opposing.is_empty() {
                out.push(tri);
                continue;
            }
            let plane = Plane::new(&tri[0], &n);
            let mut pieces = vec![plane.project_ccw(&tri)];
            let face_area = part.triangle_area(f);
            for g in &opposing {
                let q = plane.project_ccw(g);
                pieces = pieces
                    .into_iter()
                    .flat_map(|p| subtract_convex(&p, &q, contact_tolerance))
                    .collect();
                if pieces.is_empty() {
                    break;
                }
            }
            for piece in &pieces {
                for k in 1..piece.len().saturating_sub(1) {
                    let t2 = [piece[0], piece[k], piece[k + 1]];
                    if signed_area(&t2).abs() <= 1e-12 * face_area {
                        continue;
                    }
                    let mut t3 = t2.map(|p| plane.lift(p));
                    if (t3[1] - t3[0]).cross(&(t3[2] - t3[0])).dot(&n) < 0.0 {
                        t3.swap(1, 2);
                    }
                    out.push(t3);
                }
            }
        }
    }
    out.build()
}

fn opposing_faces(
    parts: &[TriMesh],
    boxes: &[Aabb],
    owner: usize,
    tri: &[Point3; 3],
    n: &Vec3,
    tol: f64,
) -> Vec<[Point3; 3]> {
    let tri_box = Aabb::from_points(tri.iter());
    let mut found = Vec::new();
    for (pj, other) in parts.iter().enumerate() {
        if pj == owner || boxes[pj].separation(&tri_box) > tol {
            continue;
        }
        for g in 0..other.len() {
            let m = other.normals()[g];
            if n.dot(&m) > -1.0 + 1e-9 {
                continue;
            }
            let gt = other.triangle(g);
            if gt.iter().all(|p| n.dot(&(p - tri[0])).abs() <= tol)
                && Aabb::from_points(gt.iter()).separation(&tri_box) <= tol
            {
                found.push(gt);
            }
        }
    }
    found
}

/// 2D chart of a plane: drops the dominant normal axis, which keeps
/// axis-aligned faces exact.
struct Plane {
    normal: Vec3,
    offset: f64,
    axis: usize,
}

impl Plane {
    fn new(origin: &Point3, normal: &Vec3) -> Self {
        let axis = normal.iamax();
        Self {
            normal: *normal,
            offset: normal.dot(&origin.coords),
            axis,
        }
    }

    fn project(&self, p: &Point3) -> P2 {
        [p[(self.axis + 1) % 3], p[(self.axis + 2) % 3]]
    }

    fn project_ccw(&self, tri: &[Point3; 3]) -> Vec<P2> {
        let mut poly: Vec<P2> = tri.iter().map(|p| self.project(p)).collect();
        if signed_area(&poly) < 0.0 {
            poly.reverse();
        }
        poly
    }

    fn lift(&self, q: P2) -> Point3 {
        let (i, j, k) = ((self.axis + 1) % 3, (self.axis + 2) % 3, self.axis);
        let mut p = Point3::origin();
        p[i] = q[0];
        p[j] = q[1];
        p[k] = (self.offset - self.normal[i] * q[0] - self.normal[j] * q[1]) / self.normal[k];
        p
    }
}

fn signed_area(poly: &[P2]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
        / 2.0
}

fn longest_edge(poly: &[P2]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            (b[0] - a[0]).hypot(b[1] - a[1])
        })
        .fold(0.0, f64::max)
}

/// Positive on the left of the directed edge `a -> b`.
fn side(a: P2, b: P2, p: P2) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

/// Sutherland–Hodgman against one half-plane; `keep_left` selects the side.
fn clip(poly: &[P2], a: P2, b: P2, keep_left: bool) -> Vec<P2> {
    let s = |p: P2| {
        if keep_left {
            side(a, b, p)
        } else {
            -side(a, b, p)
        }
    };
    let mut out = Vec::with_capacity(poly.len() + 2);
    for i in 0..poly.len() {
        let cur = poly[i];
        let next = poly[(i + 1) % poly.len()];
        let (sc, sn) = (s(cur), s(next));
        if sc >= 0.0 {
            out.push(cur);
        }
        if (sc >= 0.0) != (sn >= 0.0) {
            let t = sc / (sc - sn);
            out.push([
                cur[0] + t * (next[0] - cur[0]),
                cur[1] + t * (next[1] - cur[1]),
            ]);
        }
    }
    out
}

fn is_sliver(poly: &[P2], tol: f64) -> bool {
    poly.len() < 3 || signed_area(poly) <= tol * longest_edge(poly).max(f64::MIN_POSITIVE)
}

/// `p \ q` for convex CCW polygons, as disjoint convex pieces. Returns `p`
/// unchanged when the overlap is thinner than `tol`.
fn subtract_convex(p: &[P2], q: &[P2], tol: f64) -> Vec<Vec<P2>> {
    let edges: Vec<(P2, P2)> = (0..q.len()).map(|i| (q[i], q[(i + 1) % q.len()])).collect();
    let mut inter = p.to_vec();
    for &(a, b) in &edges {
        inter = clip(&inter, a, b, true);
        if inter.is_empty() {
            break;
        }
    }
    if is_sliver(&inter, tol) {
        return vec![p.to_vec()];
    }
    let mut pieces = Vec::new();
    let mut rest = p.to_vec();
    for &(a, b) in &edges {
        let outside = clip(&rest, a, b, false);
        if !is_sliver(&outside, tol) {
            pieces.push(outside);
        }
        rest = clip(&rest, a, b, true);
        if rest.is_empty() {
            break;
        }
    }
    pieces
}

#[derive(Default)]
struct MeshBuilder {
    vertices: Vec<Point3>,
    index: HashMap<[u64; 3], u32>,
    faces: Vec<[u32; 3]>,
}

impl MeshBuilder {
    fn vertex(&mut self, p: Point3) -> u32 {
        let key = [p.x, p.y, p.z].map(|c| (c + 0.0).to_bits());
        *self.index.entry(key).or_insert_with(|| {
            self.vertices.push(p);
            (self.vertices.len() - 1) as u32
        })
    }

    fn push(&mut self, tri: [Point3; 3]) {
        let f = tri.map(|p| self.vertex(p));
        self.faces.push(f);
    }

    fn build(self) -> Result<TriMesh> {
        TriMesh::new(self.vertices, self.faces)
    }
}
