//! Binary object masks by pinhole ray casting, pixel bounding boxes, and PGM
//! (P5) mask files.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bvh::Bvh;
use crate::geometry::{TriMesh, Vec3};
use crate::viewsphere::CameraPose;
use crate::{Error, Result};

pub const DEFAULT_RESOLUTION: usize = 512;
/// Fraction of the image height covered by the object's bounding sphere at
/// the default field of view.
pub const FILL_FRACTION: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskImage {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl MaskImage {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "mask size {width}x{height} is empty"
            )));
        }
        if bits.len() != width * height {
            return Err(Error::invalid(format!(
                "mask {width}x{height} needs {} bits, got {}",
                width * height,
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn blank(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![false; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Row-major, row 0 at the top.
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn mirrored_horizontally(&self) -> MaskImage {
        let mut out = self.clone();
        for row in out.bits.chunks_mut(self.width) {
            row.reverse();
        }
        out
    }
}

/// Inclusive pixel box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelBox {
    pub x_min: usize,
    pub y_min: usize,
    pub x_max: usize,
    pub y_max: usize,
}

/// Vertical field of view, in degrees, at which a bounding sphere seen from
/// `radius_factor` times its radius fills `FILL_FRACTION` of the image height.
pub fn default_vfov(radius_factor: f64) -> Result<f64> {
    if !(radius_factor > 1.0) {
        return Err(Error::invalid(format!(
            "radius factor {radius_factor} must exceed 1"
        )));
    }
    let half_angle = (1.0 / radius_factor).asin();
    Ok(2.0 * (half_angle.tan() / FILL_FRACTION).atan().to_degrees())
}

/// Mesh with its BVH, for rendering many views of one object.
pub struct MaskRenderer {
    bvh: Bvh,
}

impl MaskRenderer {
    pub fn new(mesh: &TriMesh) -> Self {
        Self {
            bvh: Bvh::new(mesh),
        }
    }

    /// Square `resolution`² mask; a pixel is set iff the ray through its
    /// center hits the mesh.
    pub fn render(
        &self,
        camera: &CameraPose,
        resolution: usize,
        vfov_deg: f64,
    ) -> Result<MaskImage> {
        if resolution == 0 {
            return Err(Error::invalid("resolution must be at least 1"));
        }
        if !(vfov_deg > 0.0 && vfov_deg < 180.0) {
            return Err(Error::invalid(format!(
                "vertical fov {vfov_deg} is outside (0, 180)"
            )));
        }
        let tan = (vfov_deg.to_radians() / 2.0).tan();
        let scale = 2.0 / resolution as f64;
        let mut bits = vec![false; resolution * resolution];
        if !self.bvh.is_empty() {
            bits.par_chunks_mut(resolution)
                .enumerate()
                .for_each(|(row, out)| {
                    let y = (1.0 - (row as f64 + 0.5) * scale) * tan;
                    for (col, px) in out.iter_mut().enumerate() {
                        let x = ((col as f64 + 0.5) * scale - 1.0) * tan;
                        let dir = camera.rotation * Vec3::new(x, y, -1.0);
                        *px = self
                            .bvh
                            .any_hit(&camera.position, &dir, 0.0, f64::INFINITY, None);
                    }
                });
        }
        MaskImage::new(resolution, resolution, bits)
    }
}

pub fn render_mask(
    mesh: &TriMesh,
    camera: &CameraPose,
    resolution: usize,
    vfov_deg: f64,
) -> Result<MaskImage> {
    MaskRenderer::new(mesh).render(camera, resolution, vfov_deg)
}

/// Tight box over set pixels; `None` for an empty mask.
pub fn bounding_box(mask: &MaskImage) -> Option<PixelBox> {
    let mut b: Option<PixelBox> = None;
    for (i, _) in mask.bits.iter().enumerate().filter(|(_, &v)| v) {
        let (x, y) = (i % mask.width, i / mask.width);
        b = Some(match b {
            None => PixelBox {
                x_min: x,
                y_min: y,
                x_max: x,
                y_max: y,
            },
            Some(p) => PixelBox {
                x_min: p.x_min.min(x),
                y_min: p.y_min.min(y),
                x_max: p.x_max.max(x),
                y_max: p.y_max.max(y),
            },
        });
    }
    b
}

pub fn encode_pgm(mask: &MaskImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width, mask.height).into_bytes();
    out.extend(mask.bits.iter().map(|&b| if b { 255u8 } else { 0 }));
    out
}

/// Parses the exact layout written by `encode_pgm`: single-space/newline
/// separated header, maxval 255, pixel bytes 0 or 255.
pub fn decode_pgm(bytes: &[u8]) -> Result<MaskImage> {
    let mut pos = 0usize;
    let mut token = |what: &str| -> Result<(String, u64)> {
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos == start || pos >= bytes.len() {
            return Err(Error::Parse {
                offset: start as u64,
                message: format!("missing {what} in PGM header"),
            });
        }
        let text = String::from_utf8_lossy(&bytes[start..pos]).into_owned();
        pos += 1;
        Ok((text, start as u64))
    };
    let number = |(text, offset): (String, u64), what: &str| -> Result<usize> {
        text.parse::<usize>().map_err(|_| Error::Parse {
            offset,
            message: format!("bad {what} {text:?} in PGM header"),
        })
    };
    let (magic, off) = token("magic")?;
    if magic != "P5" {
        return Err(Error::Parse {
            offset: off,
            message: format!("expected P5, found {magic:?}"),
        });
    }
    let width = number(token("width")?, "width")?;
    let height = number(token("height")?, "height")?;
    let maxval_tok = token("maxval")?;
    let maxval_off = maxval_tok.1;
    if number(maxval_tok, "maxval")? != 255 {
        return Err(Error::Parse {
            offset: maxval_off,
            message: "maxval must be 255".into(),
        });
    }
    let data = &bytes[pos..];
    if width == 0 || height == 0 || data.len() != width * height {
        return Err(Error::Parse {
            offset: pos as u64,
            message: format!(
                "expected {} pixel bytes, found {}",
                width * height,
                data.len()
            ),
        });
    }
    let mut bits = Vec::with_capacity(data.len());
    for (i, &v) in data.iter().enumerate() {
        match v {
            0 => bits.push(false),
            255 => bits.push(true),
            _ => {
                return Err(Error::Parse {
                    offset: (pos + i) as u64,
                    message: format!("pixel value {v} is neither 0 nor 255"),
                })
            }
        }
    }
    MaskImage::new(width, height, bits)
}

pub fn write_mask(mask: &MaskImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pgm(mask)).map_err(|e| Error::io(path, e))
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<MaskImage> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;
    use crate::shapes::{cube, icosphere};
    use crate::viewsphere::look_at;

    fn camera(x: f64, y: f64, z: f64) -> CameraPose {
        look_at(&Point3::new(x, y, z), &Point3::origin()).unwrap()
    }

    #[test]
    fn empty_mesh_gives_blank_mask() {
        let m = render_mask(&TriMesh::empty(), &camera(0.0, 0.0, 5.0), 8, 60.0).unwrap();
        assert_eq!(m.count(), 0);
        assert_eq!(bounding_box(&m), None);
    }

    #[test]
    fn rejects_bad_arguments() {
        let c = camera(0.0, 0.0, 5.0);
        assert!(render_mask(&cube(1.0), &c, 0, 60.0).is_err());
        assert!(render_mask(&cube(1.0), &c, 8, 0.0).is_err());
        assert!(render_mask(&cube(1.0), &c, 8, 180.0).is_err());
    }

    #[test]
    fn face_on_cube_is_mirror_symmetric() {
        let m = render_mask(&cube(20.0), &camera(0.0, 0.0, 60.0), 64, 40.0).unwrap();
        assert!(m.count() > 0);
        assert_eq!(m, m.mirrored_horizontally());
    }

    #[test]
    fn sphere_disc_area() {
        // r = 0.5 seen from d = 2 subtends half the image height.
        let (r, d) = (0.5_f64, 2.0_f64);
        let half = (r / d).asin();
        let vfov = 2.0 * (2.0 * half.tan()).atan();
        let res = 256;
        let m = render_mask(
            &icosphere(5, r),
            &camera(0.0, 0.0, d),
            res,
            vfov.to_degrees(),
        )
        .unwrap();
        // Projected disc radius is tan(half)/tan(vfov/2) of the half-height.
        let rho = half.tan() / (vfov / 2.0).tan();
        let expected = std::f64::consts::PI * rho * rho / 4.0;
        let got = m.count() as f64 / (res * res) as f64;
        assert!((got / expected - 1.0).abs() < 0.02, "{got} vs {expected}");
    }

    #[test]
    fn default_fov_fills_ninety_percent() {
        let vfov = default_vfov(2.0).unwrap();
        let res = 200;
        let m = render_mask(&icosphere(5, 1.0), &camera(0.0, 0.0, 2.0), res, vfov).unwrap();
        let b = bounding_box(&m).unwrap();
        let rows = (b.y_max - b.y_min + 1) as f64 / res as f64;
        assert!((rows - FILL_FRACTION).abs() < 0.02, "{rows}");
        assert!(default_vfov(1.0).is_err());
    }

    #[test]
    fn boxes() {
        let mut m = MaskImage::blank(10, 10).unwrap();
        m.set(3, 7, true);
        assert_eq!(
            bounding_box(&m),
            Some(PixelBox {
                x_min: 3,
                y_min: 7,
                x_max: 3,
                y_max: 7
            })
        );
        let full = MaskImage::new(4, 3, vec![true; 12]).unwrap();
        assert_eq!(
            bounding_box(&full),
            Some(PixelBox {
                x_min: 0,
                y_min: 0,
                x_max: 3,
                y_max: 2
            })
        );
    }

    #[test]
    fn pgm_format() {
        let mut m = MaskImage::blank(4, 2).unwrap();
        m.set(1, 0, true);
        let bytes = encode_pgm(&m);
        assert!(bytes.starts_with(b"P5\n4 2\n255\n"));
        assert_eq!(bytes.len(), 11 + 8);
        assert_eq!(decode_pgm(&bytes).unwrap(), m);

        let mut bad = bytes.clone();
        bad[12] = 7;
        assert!(matches!(
            decode_pgm(&bad),
            Err(Error::Parse { offset: 12, .. })
        ));
        assert!(decode_pgm(b"P6\n4 2\n255\n").is_err());
        assert!(decode_pgm(&bytes[..15]).is_err());
        assert!(decode_pgm(b"P5\n4 2\n1").is_err());
    }
}
