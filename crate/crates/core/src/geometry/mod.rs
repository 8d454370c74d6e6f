//! Triangle meshes and the handful of operations the rest of the crate needs:
//! area, orientation checks, subdivision, boundary union of mated blocks and
//! binary STL.
//!
//! Units are millimetres throughout. The object frame has +Y pointing out of
//! the base plate's top face.

mod stl;
mod subdivide;
mod union;

use nalgebra::Matrix3;

use crate::{Error, Result};

pub use stl::{read_stl, stl_from_bytes, stl_to_bytes, write_stl, STL_HEADER};
pub use subdivide::{subdivide, subdivide_with_parents, Subdivision};
pub use union::{union_boundary, DEFAULT_CONTACT_TOLERANCE};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;

/// Proper rigid motion `p -> rotation * p + translation`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Builds a transform, rejecting rotations that are not orthonormal with
    /// determinant +1 (within 1e-9).
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        if gram.iter().any(|v| v.abs() > 1e-9) || (rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "rotation is not a proper orthonormal matrix",
            ));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("translation is not finite"));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn apply_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Homogeneous 4×4 matrix in row-major order.
    pub fn to_row_major(&self) -> [f64; 16] {
        let r = &self.rotation;
        let t = &self.translation;
        // `+ 0.0` folds -0.0 into 0.0 so serialized poses are stable.
        [
            r[(0, 0)] + 0.0,
            r[(0, 1)] + 0.0,
            r[(0, 2)] + 0.0,
            t.x + 0.0,
            r[(1, 0)] + 0.0,
            r[(1, 1)] + 0.0,
            r[(1, 2)] + 0.0,
            t.y + 0.0,
            r[(2, 0)] + 0.0,
            r[(2, 1)] + 0.0,
            r[(2, 2)] + 0.0,
            t.z + 0.0,
            0.0,
            0.0,
            0.0,
            1.0,
        ]
    }

    pub fn from_row_major(m: &[f64; 16]) -> Result<Self> {
        if m[12] != 0.0 || m[13] != 0.0 || m[14] != 0.0 || m[15] != 1.0 {
            return Err(Error::invalid("pose bottom row must be (0, 0, 0, 1)"));
        }
        let rotation = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        Self::new(rotation, Vec3::new(m[3], m[7], m[11]))
    }

    /// Maximum absolute entry-wise difference against `other`.
    pub fn distance(&self, other: &RigidTransform) -> f64 {
        let dr = (self.rotation - other.rotation).abs().max();
        let dt = (self.translation - other.translation).abs().max();
        dr.max(dt)
    }
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn new(min: Point3, max: Point3) -> Result<Self> {
        if (0..3).any(|i| !(min[i] <= max[i])) {
            return Err(Error::invalid("aabb min must not exceed max"));
        }
        Ok(Self { min, max })
    }

    /// Empty box that absorbs any point; `min > max` until something is added.
    pub fn empty() -> Self {
        Self {
            min: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|i| self.min[i] > self.max[i])
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Point3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn merge(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn extents(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Point3 {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn corners(&self) -> [Point3; 8] {
        let (a, b) = (self.min, self.max);
        std::array::from_fn(|i| {
            Point3::new(
                if i & 1 == 0 { a.x } else { b.x },
                if i & 2 == 0 { a.y } else { b.y },
                if i & 4 == 0 { a.z } else { b.z },
            )
        })
    }

    /// Largest per-axis gap between the two boxes. Positive means the boxes are
    /// disjoint by at least that much; zero means they touch; negative means
    /// every axis overlaps and the value is the smallest overlap depth.
    pub fn separation(&self, other: &Aabb) -> f64 {
        (0..3)
            .map(|i| (self.min[i] - other.max[i]).max(other.min[i] - self.max[i]))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn surface_area(&self) -> f64 {
        let e = self.extents();
        2.0 * (e.x * e.y + e.y * e.z + e.z * e.x)
    }

    pub fn longest_axis(&self) -> usize {
        let e = self.extents();
        if e.x >= e.y && e.x >= e.z {
            0
        } else if e.y >= e.z {
            1
        } else {
            2
        }
    }
}

/// Indexed triangle mesh with one unit outward normal per face.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct TriMesh {
    vertices: Vec<Point3>,
    faces: Vec<[u32; 3]>,
    normals: Vec<Vec3>,
}

impl TriMesh {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Validates indices, finiteness and non-degeneracy, and derives normals
    /// from the counter-clockwise winding of each face.
    pub fn new(vertices: Vec<Point3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        if let Some(i) = vertices
            .iter()
            .position(|v| !v.iter().all(|c| c.is_finite()))
        {
            return Err(Error::invalid(format!("vertex {i} is not finite")));
        }
        let mut normals = Vec::with_capacity(faces.len());
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&i| i as usize >= vertices.len()) {
                return Err(Error::invalid(format!(
                    "face {fi} references a vertex out of range ({} vertices)",
                    vertices.len()
                )));
            }
            let [a, b, c] = f.map(|i| vertices[i as usize]);
            let n = (b - a).cross(&(c - a));
            let len = n.norm();
            if !(len > 0.0) || !len.is_finite() {
                return Err(Error::invalid(format!("face {fi} is degenerate")));
            }
            normals.push(n / len);
        }
        Ok(Self {
            vertices,
            faces,
            normals,
        })
    }

    /// Internal constructor for callers that already know the normals, e.g.
    /// subdivision where children inherit the parent normal exactly.
    pub(crate) fn from_raw(
        vertices: Vec<Point3>,
        faces: Vec<[u32; 3]>,
        normals: Vec<Vec3>,
    ) -> Self {
        debug_assert_eq!(faces.len(), normals.len());
        Self {
            vertices,
            faces,
            normals,
        }
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn triangle(&self, face: usize) -> [Point3; 3] {
        self.faces[face].map(|i| self.vertices[i as usize])
    }

    pub fn triangle_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn centroid(&self, face: usize) -> Point3 {
        let [a, b, c] = self.triangle(face);
        Point3::from((a.coords + b.coords + c.coords) / 3.0)
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    /// Largest distance from `center` to any vertex.
    pub fn bounding_radius(&self, center: &Point3) -> f64 {
        self.vertices
            .iter()
            .map(|v| (v - center).norm())
            .fold(0.0, f64::max)
    }

    /// Divergence-theorem volume; positive for a closed, outward-facing mesh.
    pub fn signed_volume(&self) -> f64 {
        (0..self.len())
            .map(|f| {
                let [a, b, c] = self.triangle(f);
                a.coords.dot(&b.coords.cross(&c.coords))
            })
            .sum::<f64>()
            / 6.0
    }

    /// Sum of area-weighted normals. Vanishes for any closed surface, with or
    /// without T-junctions.
    pub fn vector_area(&self) -> Vec3 {
        (0..self.len())
            .map(|f| {
                let [a, b, c] = self.triangle(f);
                0.5 * (b - a).cross(&(c - a))
            })
            .sum()
    }

    /// Closed-surface test used by the visibility code: the vector area must
    /// vanish relative to the total area, and the volume must be positive.
    pub fn is_closed(&self) -> bool {
        let area = surface_area(self);
        area > 0.0 && self.vector_area().norm() <= 1e-9 * area && self.signed_volume() > 0.0
    }

    /// Generalized winding number of `p` with respect to the surface. Close to
    /// 1 inside a closed outward mesh, close to 0 outside.
    pub fn winding_number(&self, p: &Point3) -> f64 {
        let mut total = 0.0;
        for f in 0..self.len() {
            let [a, b, c] = self.triangle(f);
            let (a, b, c) = (a - p, b - p, c - p);
            let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
            let num = a.dot(&b.cross(&c));
            let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
            total += 2.0 * num.atan2(den);
        }
        total / (4.0 * std::f64::consts::PI)
    }

    /// Concatenates meshes without merging vertices.
    pub fn concat(meshes: &[TriMesh]) -> TriMesh {
        let mut out = TriMesh::empty();
        for m in meshes {
            let base = out.vertices.len() as u32;
            out.vertices.extend_from_slice(&m.vertices);
            out.faces
                .extend(m.faces.iter().map(|f| f.map(|i| i + base)));
            out.normals.extend_from_slice(&m.normals);
        }
        out
    }

    /// Keeps the listed faces (in the given order), compacting vertices.
    pub fn select_faces(&self, faces: impl IntoIterator<Item = usize>) -> TriMesh {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut out = TriMesh::empty();
        for f in faces {
            let tri = self.faces[f].map(|i| {
                let slot = &mut remap[i as usize];
                if *slot == u32::MAX {
                    *slot = out.vertices.len() as u32;
                    out.vertices.push(self.vertices[i as usize]);
                }
                *slot
            });
            out.faces.push(tri);
            out.normals.push(self.normals[f]);
        }
        out
    }

    pub fn transformed(&self, t: &RigidTransform) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|v| t.apply_point(v)).collect(),
            faces: self.faces.clone(),
            normals: self.normals.iter().map(|n| t.apply_vector(n)).collect(),
        }
    }

    /// Uniform scale about the origin.
    pub fn scaled(&self, s: f64) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|v| v * s).collect(),
            faces: self.faces.clone(),
            normals: self.normals.clone(),
        }
    }
}

/// Total surface area in mm².
pub fn surface_area(mesh: &TriMesh) -> f64 {
    (0..mesh.len()).map(|f| mesh.triangle_area(f)).sum()
}

const CUBOID_QUADS: [[u32; 4]; 6] = [
    [0, 2, 6, 4],
    [1, 3, 7, 5],
    [0, 1, 5, 4],
    [2, 3, 7, 6],
    [0, 1, 3, 2],
    [4, 5, 7, 6],
];

/// Closed 12-triangle box with the given edge lengths along local X, Y, Z,
/// centered on the local origin and then moved by `pose`.
pub fn cuboid_mesh(dimensions: [f64; 3], pose: &RigidTransform) -> Result<TriMesh> {
    if dimensions.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
        return Err(Error::invalid(format!(
            "cuboid dimensions must be positive, got {dimensions:?}"
        )));
    }
    let h = dimensions.map(|d| d / 2.0);
    let local: Vec<Point3> = (0..8)
        .map(|i| {
            Point3::new(
                if i & 1 == 0 { -h[0] } else { h[0] },
                if i & 2 == 0 { -h[1] } else { h[1] },
                if i & 4 == 0 { -h[2] } else { h[2] },
            )
        })
        .collect();
    let mut faces = Vec::with_capacity(12);
    for q in CUBOID_QUADS {
        let [a, b, c, d] = q;
        let n =
            (local[b as usize] - local[a as usize]).cross(&(local[c as usize] - local[a as usize]));
        let quad_center: Vec3 = q.iter().map(|&i| local[i as usize].coords).sum::<Vec3>() / 4.0;
        if n.dot(&quad_center) > 0.0 {
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        } else {
            faces.push([a, c, b]);
            faces.push([a, d, c]);
        }
    }
    let vertices = local.iter().map(|p| pose.apply_point(p)).collect();
    TriMesh::new(vertices, faces)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rot_y90() -> RigidTransform {
        RigidTransform::new(
            Matrix3::new(0.0, 0.0, 1.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0),
            Vec3::new(3.0, -2.0, 7.0),
        )
        .unwrap()
    }

    #[test]
    fn cuboid_areas_match_closed_form() {
        let id = RigidTransform::identity();
        let small = cuboid_mesh([20.0, 20.0, 60.0], &id).unwrap();
        assert_eq!(small.len(), 12);
        assert!((surface_area(&small) - 5600.0).abs() < 1e-9);
        let base = cuboid_mesh([20.0, 60.0, 120.0], &id).unwrap();
        assert!((surface_area(&base) - 21600.0).abs() < 1e-9);
    }

    #[test]
    fn unit_cuboid_is_centered() {
        let m = cuboid_mesh([1.0, 1.0, 1.0], &RigidTransform::identity()).unwrap();
        let b = m.aabb();
        assert_eq!(b.min, Point3::new(-0.5, -0.5, -0.5));
        assert_eq!(b.max, Point3::new(0.5, 0.5, 0.5));
        assert!((surface_area(&m) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn cuboid_is_closed_and_outward_under_pose() {
        let m = cuboid_mesh([20.0, 60.0, 120.0], &rot_y90()).unwrap();
        assert!(m.is_closed());
        assert!((m.signed_volume() - 20.0 * 60.0 * 120.0).abs() < 1e-6);
        for f in 0..m.len() {
            let out = m.centroid(f) - Point3::new(3.0, -2.0, 7.0);
            assert!(m.normals()[f].dot(&out) > 0.0, "face {f} points inward");
            assert!((m.normals()[f].norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn non_positive_dimension_is_rejected() {
        let id = RigidTransform::identity();
        assert!(matches!(
            cuboid_mesh([0.0, 1.0, 1.0], &id),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            cuboid_mesh([1.0, -1.0, 1.0], &id),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn empty_mesh_has_zero_area() {
        assert_eq!(surface_area(&TriMesh::empty()), 0.0);
        assert!(!TriMesh::empty().is_closed());
    }

    #[test]
    fn mesh_constructor_rejects_bad_input() {
        let v = vec![
            Point3::origin(),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
        ];
        assert!(TriMesh::new(v.clone(), vec![[0, 1, 2]]).is_err());
        assert!(TriMesh::new(v, vec![[0, 1, 3]]).is_err());
    }

    #[test]
    fn winding_number_separates_inside_from_outside() {
        let m = cuboid_mesh([2.0, 2.0, 2.0], &RigidTransform::identity()).unwrap();
        assert!((m.winding_number(&Point3::origin()) - 1.0).abs() < 1e-9);
        assert!(m.winding_number(&Point3::new(0.0, 0.0, 5.0)).abs() < 1e-9);
    }

    #[test]
    fn open_box_is_not_closed() {
        let m = cuboid_mesh([2.0, 2.0, 2.0], &RigidTransform::identity()).unwrap();
        let open = m.select_faces(0..10);
        assert!(!open.is_closed());
    }

    #[test]
    fn aabb_separation_signs() {
        let a = Aabb::new(Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 1.0, 1.0)).unwrap();
        let touching = Aabb::new(Point3::new(1.0, 0.0, 0.0), Point3::new(2.0, 1.0, 1.0)).unwrap();
        let apart = Aabb::new(Point3::new(1.5, 0.0, 0.0), Point3::new(2.0, 1.0, 1.0)).unwrap();
        let inside = Aabb::new(Point3::new(0.25, 0.25, 0.25), Point3::new(0.5, 0.5, 0.5)).unwrap();
        assert_eq!(a.separation(&touching), 0.0);
        assert_eq!(a.separation(&apart), 0.5);
        assert!(a.separation(&inside) < 0.0);
        assert!(Aabb::new(Point3::new(1.0, 0.0, 0.0), Point3::origin()).is_err());
    }

    #[test]
    fn pose_row_major_round_trip() {
        let t = rot_y90();
        let back = RigidTransform::from_row_major(&t.to_row_major()).unwrap();
        assert_eq!(back, t);
        let mut bad = t.to_row_major();
        bad[0] = 2.0;
        assert!(RigidTransform::from_row_major(&bad).is_err());
    }
}
