//! Binary STL: 80-byte header, little-endian u32 triangle count, then 50
//! bytes per triangle (normal, three vertices, u16 attribute).

use std::collections::HashMap;
use std::path::Path;

use super::{Point3, TriMesh};
use crate::{Error, Result};

/// Header written into every file. Padded with zero bytes to 80.
pub const STL_HEADER: &[u8] = b"blocksworld binary STL";

const HEADER_LEN: usize = 80;
const RECORD_LEN: usize = 50;

pub fn stl_to_bytes(mesh: &TriMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 + RECORD_LEN * mesh.len());
    let mut header = [0u8; HEADER_LEN];
    header[..STL_HEADER.len()].copy_from_slice(STL_HEADER);
    out.extend_from_slice(&header);
    out.extend_from_slice(&(mesh.len() as u32).to_le_bytes());
    for f in 0..mesh.len() {
        let n = mesh.normals()[f];
        for c in n.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
        for p in mesh.triangle(f) {
            for c in p.iter() {
                out.extend_from_slice(&(*c as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out
}

/// Parses a binary STL. Vertices with identical `f32` coordinates are merged
/// and normals are recomputed from the vertex winding.
pub fn stl_from_bytes(bytes: &[u8]) -> Result<TriMesh> {
    if bytes.len() < HEADER_LEN + 4 {
        return Err(Error::Parse {
            offset: bytes.len() as u64,
            message: format!(
                "file is {} bytes, shorter than the 84-byte preamble",
                bytes.len()
            ),
        });
    }
    let count = u32::from_le_bytes(bytes[HEADER_LEN..HEADER_LEN + 4].try_into().unwrap()) as u64;
    let expected = (HEADER_LEN + 4) as u64 + RECORD_LEN as u64 * count;
    if bytes.len() as u64 != expected {
        return Err(Error::Parse {
            offset: (bytes.len() as u64).min(expected),
            message: format!(
                "triangle count {count} implies {expected} bytes but the file has {}",
                bytes.len()
            ),
        });
    }

    let mut vertices = Vec::new();
    let mut index: HashMap<[u32; 3], u32> = HashMap::new();
    let mut faces = Vec::with_capacity(count as usize);
    for t in 0..count as usize {
        let start = HEADER_LEN + 4 + t * RECORD_LEN;
        let rec = &bytes[start..start + RECORD_LEN];
        let mut face = [0u32; 3];
        for (k, slot) in face.iter_mut().enumerate() {
            let at = 12 + 12 * k;
            let bits: [u32; 3] = std::array::from_fn(|c| {
                u32::from_le_bytes(rec[at + 4 * c..at + 4 * c + 4].try_into().unwrap())
            });
            let coords = bits.map(f32::from_bits);
            if coords.iter().any(|c| !c.is_finite()) {
                return Err(Error::Parse {
                    offset: (start + at) as u64,
                    message: format!("triangle {t} has a non-finite vertex"),
                });
            }
            // -0.0 and 0.0 are the same point.
            let key = coords.map(|c| (c + 0.0).to_bits());
            *slot = *index.entry(key).or_insert_with(|| {
                vertices.push(Point3::new(
                    coords[0] as f64,
                    coords[1] as f64,
                    coords[2] as f64,
                ));
                (vertices.len() - 1) as u32
            });
        }
        faces.push(face);
    }
    TriMesh::new(vertices, faces).map_err(|e| Error::Parse {
        offset: HEADER_LEN as u64 + 4,
        message: e.to_string(),
    })
}

pub fn write_stl(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, stl_to_bytes(mesh)).map_err(|e| Error::io(path, e))
}

pub fn read_stl(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    stl_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{cuboid_mesh, surface_area, RigidTransform};

    #[test]
    fn unit_cube_round_trip() {
        let cube = cuboid_mesh([1.0; 3], &RigidTransform::identity()).unwrap();
        let bytes = stl_to_bytes(&cube);
        assert_eq!(bytes.len(), 84 + 12 * 50);
        let back = stl_from_bytes(&bytes).unwrap();
        assert_eq!(back.len(), 12);
        assert_eq!(back.vertices().len(), 8);
        assert!((surface_area(&back) - 6.0).abs() < 6.0 * f32::EPSILON as f64);
    }

    #[test]
    fn empty_mesh_is_valid_with_zero_count() {
        let bytes = stl_to_bytes(&TriMesh::empty());
        assert_eq!(bytes.len(), 84);
        assert_eq!(&bytes[80..84], &[0, 0, 0, 0]);
        assert_eq!(&bytes[..STL_HEADER.len()], STL_HEADER);
        assert!(stl_from_bytes(&bytes).unwrap().is_empty());
    }

    #[test]
    fn count_mismatch_reports_offset() {
        let cube = cuboid_mesh([1.0; 3], &RigidTransform::identity()).unwrap();
        let mut bytes = stl_to_bytes(&cube);
        bytes[80..84].copy_from_slice(&13u32.to_le_bytes());
        match stl_from_bytes(&bytes) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 684),
            other => panic!("expected parse error, got {other:?}"),
        }
        let truncated = &stl_to_bytes(&cube)[..500];
        assert!(matches!(
            stl_from_bytes(truncated),
            Err(Error::Parse { offset: 500, .. })
        ));
        assert!(matches!(
            stl_from_bytes(&[0u8; 10]),
            Err(Error::Parse { offset: 10, .. })
        ));
    }

    #[test]
    fn non_finite_vertex_is_rejected() {
        let cube = cuboid_mesh([1.0; 3], &RigidTransform::identity()).unwrap();
        let mut bytes = stl_to_bytes(&cube);
        bytes[84 + 12..84 + 16].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            stl_from_bytes(&bytes),
            Err(Error::Parse { offset: 96, .. })
        ));
    }
}
