//! Bounding volume hierarchy over the faces of a [`TriMesh`], answering the
//! two ray queries the crate needs: "is anything in the way" for visibility
//! and "does this ray touch the mesh at all" for masks.
//!
//! Built top-down with median splits on the longest centroid axis. Nodes are
//! stored depth-first: an interior node's left child follows it directly, the
//! right child index is stored explicitly.

use crate::geometry::{Aabb, Point3, TriMesh, Vec3};

const LEAF_SIZE: usize = 4;

/// Slack on barycentric coordinates so rays through shared edges hit at least
/// one of the two faces.
const EDGE_SLACK: f64 = 1e-10;

#[derive(Clone, Debug)]
struct Node {
    bounds: Aabb,
    /// Leaf: first entry in `order`. Interior: index of the right child.
    index: u32,
    /// Number of faces for leaves, zero for interior nodes.
    count: u32,
}

#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<Node>,
    triangles: Vec<[Point3; 3]>,
    order: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub face: u32,
}

impl Bvh {
    pub fn new(mesh: &TriMesh) -> Self {
        let triangles: Vec<[Point3; 3]> = (0..mesh.len()).map(|f| mesh.triangle(f)).collect();
        let centroids: Vec<Point3> = triangles
            .iter()
            .map(|t| Point3::from((t[0].coords + t[1].coords + t[2].coords) / 3.0))
            .collect();
        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * triangles.len() / LEAF_SIZE + 1);
        if !triangles.is_empty() {
            build(&mut nodes, &triangles, &centroids, &mut order, 0);
        }
        Self {
            nodes,
            triangles,
            order,
        }
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// True if the ray `origin + t·dir` hits any face other than `skip` with
    /// `t_min < t < t_max`.
    pub fn any_hit(
        &self,
        origin: &Point3,
        dir: &Vec3,
        t_min: f64,
        t_max: f64,
        skip: Option<u32>,
    ) -> bool {
        let mut found = false;
        self.traverse(origin, dir, t_min, t_max, |face, _, _| {
            found = Some(face) != skip;
            found
        });
        found
    }

    /// Nearest hit with `t_min < t < t_max`.
    pub fn first_hit(&self, origin: &Point3, dir: &Vec3, t_min: f64, t_max: f64) -> Option<Hit> {
        let mut best: Option<Hit> = None;
        self.traverse(origin, dir, t_min, t_max, |face, t, limit| {
            if best.is_none_or(|b| t < b.t) {
                best = Some(Hit { t, face });
                *limit = t;
            }
            false
        });
        best
    }

    /// Walks every leaf the ray reaches and calls `visit(face, t, t_max)` for
    /// each intersected face. `visit` may shrink `t_max`; returning true stops
    /// the walk.
    fn traverse(
        &self,
        origin: &Point3,
        dir: &Vec3,
        t_min: f64,
        t_max: f64,
        mut visit: impl FnMut(u32, f64, &mut f64) -> bool,
    ) {
        if self.nodes.is_empty() {
            return;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut limit = t_max;
        let mut stack = [0u32; 64];
        let mut top = 1;
        while top > 0 {
            top -= 1;
            let node = &self.nodes[stack[top] as usize];
            if !slab_test(&node.bounds, origin, &inv, t_min, limit) {
                continue;
            }
            if node.count > 0 {
                let start = node.index as usize;
                for &face in &self.order[start..start + node.count as usize] {
                    if let Some(t) = intersect(&self.triangles[face as usize], origin, dir) {
                        if t > t_min && t < limit && visit(face, t, &mut limit) {
                            return;
                        }
                    }
                }
            } else {
                let here = stack[top];
                stack[top] = node.index;
                stack[top + 1] = here + 1;
                top += 2;
            }
        }
    }
}

fn build(
    nodes: &mut Vec<Node>,
    triangles: &[[Point3; 3]],
    centroids: &[Point3],
    order: &mut [u32],
    offset: usize,
) -> u32 {
    let bounds = order.iter().fold(Aabb::empty(), |b, &f| {
        b.merge(&Aabb::from_points(triangles[f as usize].iter()))
    });
    let id = nodes.len() as u32;
    if order.len() <= LEAF_SIZE {
        nodes.push(Node {
            bounds,
            index: offset as u32,
            count: order.len() as u32,
        });
        return id;
    }
    let cbounds = Aabb::from_points(order.iter().map(|&f| &centroids[f as usize]));
    let axis = cbounds.longest_axis();
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis]
            .total_cmp(&centroids[b as usize][axis])
            .then(a.cmp(&b))
    });
    nodes.push(Node {
        bounds,
        index: 0,
        count: 0,
    });
    let (left, right) = order.split_at_mut(mid);
    build(nodes, triangles, centroids, left, offset);
    let right_id = build(nodes, triangles, centroids, right, offset + mid);
    nodes[id as usize].index = right_id;
    id
}

#[inline]
fn slab_test(b: &Aabb, origin: &Point3, inv: &Vec3, t_min: f64, t_max: f64) -> bool {
    let mut lo = t_min;
    let mut hi = t_max;
    for k in 0..3 {
        let t0 = (b.min[k] - origin[k]) * inv[k];
        let t1 = (b.max[k] - origin[k]) * inv[k];
        // NaN (origin on a slab plane with a zero direction component) is
        // ignored by max/min, i.e. treated as unconstrained.
        lo = lo.max(t0.min(t1));
        hi = hi.min(t0.max(t1));
    }
    lo <= hi
}

/// Möller–Trumbore, double-sided.
#[inline]
pub(crate) fn intersect(tri: &[Point3; 3], origin: &Point3, dir: &Vec3) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let inv_det = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv_det;
    if !(-EDGE_SLACK..=1.0 + EDGE_SLACK).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv_det;
    if v < -EDGE_SLACK || u + v > 1.0 + EDGE_SLACK {
        return None;
    }
    Some(e2.dot(&q) * inv_det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{cuboid_mesh, subdivide, RigidTransform};
    use crate::shapes::icosphere;

    fn brute_first(mesh: &TriMesh, o: &Point3, d: &Vec3) -> Option<f64> {
        (0..mesh.len())
            .filter_map(|f| intersect(&mesh.triangle(f), o, d))
            .filter(|&t| t > 0.0)
            .min_by(f64::total_cmp)
    }

    #[test]
    fn agrees_with_brute_force() {
        let mesh = subdivide(&icosphere(3, 1.0), 0.2).unwrap();
        let bvh = Bvh::new(&mesh);
        let mut state = 0x9E37_79B9_7F4A_7C15u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for _ in 0..500 {
            let o = Point3::new(next() * 3.0, next() * 3.0, next() * 3.0);
            let d = Vec3::new(next(), next(), next());
            let brute = brute_first(&mesh, &o, &d);
            let fast = bvh.first_hit(&o, &d, 0.0, f64::INFINITY).map(|h| h.t);
            assert_eq!(brute, fast);
            assert_eq!(
                brute.is_some(),
                bvh.any_hit(&o, &d, 0.0, f64::INFINITY, None)
            );
        }
    }

    #[test]
    fn axis_aligned_rays_hit_boxes() {
        let cube = cuboid_mesh([2.0; 3], &RigidTransform::identity()).unwrap();
        let bvh = Bvh::new(&cube);
        let o = Point3::new(0.0, 0.0, 5.0);
        let d = Vec3::new(0.0, 0.0, -1.0);
        let hit = bvh.first_hit(&o, &d, 0.0, f64::INFINITY).unwrap();
        assert!((hit.t - 4.0).abs() < 1e-12);
        // Through the face diagonal, where two triangles meet.
        let o = Point3::new(0.3, 0.3, 5.0);
        assert!(bvh.any_hit(&o, &d, 0.0, f64::INFINITY, None));
        assert!(!bvh.any_hit(&o, &d, 0.0, 3.9, None));
        let miss = Point3::new(1.5, 0.0, 5.0);
        assert!(!bvh.any_hit(&miss, &d, 0.0, f64::INFINITY, None));
    }

    #[test]
    fn empty_mesh_never_hits() {
        let bvh = Bvh::new(&TriMesh::empty());
        assert!(bvh.is_empty());
        assert!(bvh
            .first_hit(&Point3::origin(), &Vec3::x(), 0.0, 1.0)
            .is_none());
    }
}
