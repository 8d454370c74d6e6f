use std::collections::HashMap;

use super::{Point3, TriMesh};
use crate::{Error, Result};

const REL_TIE: f64 = 1e-9;

/// A subdivided mesh together with the index of the input face each output
/// face came from.
#[derive(Clone, Debug)]
pub struct Subdivision {
    pub mesh: TriMesh,
    pub parent: Vec<usize>,
}

/// Splits faces until no edge is longer than `max_edge`.
pub fn subdivide(mesh: &TriMesh, max_edge: f64) -> Result<TriMesh> {
    subdivide_with_parents(mesh, max_edge).map(|s| s.mesh)
}

/// Longest-edge bisection. Each face is split at the midpoint of its longest
/// edge (first of equals in winding order, up to a relative 1e-9) until every edge is at most
/// `max_edge`. Children inherit the parent's normal and winding, so faces
/// already fine enough pass through untouched. Midpoints on shared edges are
/// shared between neighbours when both sides split the same edge.
pub fn subdivide_with_parents(mesh: &TriMesh, max_edge: f64) -> Result<Subdivision> {
    if !(max_edge > 0.0) || !max_edge.is_finite() {
        return Err(Error::invalid(format!(
            "max_edge must be positive, got {max_edge}"
        )));
    }
    let limit = max_edge * max_edge;
    let mut vertices: Vec<Point3> = mesh.vertices().to_vec();
    let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
    let mut faces = Vec::with_capacity(mesh.len());
    let mut normals = Vec::with_capacity(mesh.len());
    let mut parent = Vec::with_capacity(mesh.len());
    let mut stack: Vec<[u32; 3]> = Vec::new();

    for (fi, &face) in mesh.faces().iter().enumerate() {
        stack.push(face);
        while let Some(tri) = stack.pop() {
            let p = tri.map(|i| vertices[i as usize]);
            let lens = [
                (p[1] - p[0]).norm_squared(),
                (p[2] - p[1]).norm_squared(),
                (p[0] - p[2]).norm_squared(),
            ];
            // Lengths within a relative 1e-9 count as equal, so rounding
            // noise from scaling or moving the mesh cannot change the split.
            let mut k = 0;
            for e in 1..3 {
                if lens[e] > lens[k] * (1.0 + REL_TIE) {
                    k = e;
                }
            }
            if lens[k] <= limit * (1.0 + REL_TIE) {
                faces.push(tri);
                normals.push(mesh.normals()[fi]);
                parent.push(fi);
                continue;
            }
            // Rotate so the edge being split is (a, b).
            let (a, b, c) = (tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let key = (a.min(b), a.max(b));
            let m = *midpoints.entry(key).or_insert_with(|| {
                let pa = vertices[a as usize];
                let pb = vertices[b as usize];
                vertices.push(nalgebra::center(&pa, &pb));
                (vertices.len() - 1) as u32
            });
            // Pushed in reverse so the (a, m, c) half is emitted first.
            stack.push([m, b, c]);
            stack.push([a, m, c]);
        }
    }

    Ok(Subdivision {
        mesh: TriMesh::from_raw(vertices, faces, normals),
        parent,
    })
}
