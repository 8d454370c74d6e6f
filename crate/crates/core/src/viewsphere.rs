//! Camera placement: a Fibonacci lattice on the view sphere, look-at
//! orientation toward the object, and the eight-tile octahedral partition of
//! camera directions.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::geometry::{Point3, Vec3};
use crate::{Error, Result};

/// Number of views per object in the reference dataset.
pub const DEFAULT_VIEW_COUNT: usize = 768;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Viewpoint {
    pub index: usize,
    pub position: Point3,
    pub radius: f64,
}

/// Camera position plus orientation. The rotation's columns are the camera's
/// right, up and backward (−forward) axes in world coordinates, so it maps
/// camera coordinates (looking down −Z) to world coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraPose {
    pub position: Point3,
    pub rotation: Matrix3<f64>,
}

impl CameraPose {
    pub fn right(&self) -> Vec3 {
        self.rotation.column(0).into()
    }

    pub fn up(&self) -> Vec3 {
        self.rotation.column(1).into()
    }

    pub fn forward(&self) -> Vec3 {
        -Vec3::from(self.rotation.column(2))
    }
}

/// One of the eight spherical triangles of the octahedral view sphere.
///
/// Ids run 1..=8 from the sign code `4·[x<0] + 2·[y<0] + [z<0]` plus one, so
/// oh₁ is the all-positive octant and oh₈ the all-negative one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OctaTile(u8);

impl OctaTile {
    pub const ALL: [OctaTile; 8] = [
        OctaTile(1),
        OctaTile(2),
        OctaTile(3),
        OctaTile(4),
        OctaTile(5),
        OctaTile(6),
        OctaTile(7),
        OctaTile(8),
    ];

    pub fn new(id: u8) -> Result<Self> {
        if (1..=8).contains(&id) {
            Ok(Self(id))
        } else {
            Err(Error::invalid(format!(
                "octahedral tile id must be 1..=8, got {id}"
            )))
        }
    }

    pub fn id(self) -> u8 {
        self.0
    }

    /// Sign of each axis over the tile: +1 or −1.
    pub fn signs(self) -> [f64; 3] {
        let code = self.0 - 1;
        [4, 2, 1].map(|bit| if code & bit != 0 { -1.0 } else { 1.0 })
    }

    /// Tile on the opposite side of the sphere.
    pub fn antipode(self) -> OctaTile {
        OctaTile(8 - (self.0 - 1))
    }
}

impl std::fmt::Display for OctaTile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "oh_{}", self.0)
    }
}

/// Golden-angle spiral with half-index offsets: `z_i = (1 − 2(i+½)/n)·r`,
/// azimuth `2π·i·(1 − 1/φ)`. Poles are never hit exactly.
pub fn fibonacci_lattice(n: usize, radius: f64) -> Result<Vec<Viewpoint>> {
    if n == 0 {
        return Err(Error::invalid("lattice needs at least one point"));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::invalid(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    let step = 2.0 * std::f64::consts::PI * (1.0 - 1.0 / golden);
    Ok((0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = step * i as f64;
            let unit = Vec3::new(rho * phi.cos(), rho * phi.sin(), z);
            // Renormalize so |p| = r holds to rounding.
            let position = Point3::from(unit / unit.norm() * radius);
            Viewpoint {
                index: i,
                position,
                radius,
            }
        })
        .collect())
}

/// Orientation looking from `position` at `target` with world +Y as the up
/// reference. When the view direction is parallel to ±Y, world +X is used as
/// the up reference instead.
///
/// `right = forward × up_ref` (normalized), `up = right × forward`.
pub fn look_at(position: &Point3, target: &Point3) -> Result<CameraPose> {
    let delta = target - position;
    let dist = delta.norm();
    if !(dist > 0.0) {
        return Err(Error::invalid("camera position coincides with its target"));
    }
    let forward = delta / dist;
    let mut right = forward.cross(&Vec3::y());
    if right.norm() <= 1e-12 {
        right = forward.cross(&Vec3::x());
    }
    let right = right.normalize();
    let up = right.cross(&forward);
    Ok(CameraPose {
        position: *position,
        rotation: Matrix3::from_columns(&[right, up, -forward]),
    })
}

/// Octant tile containing the direction `position`. Exact zeros count as
/// positive.
pub fn map_to_tile(position: &Point3) -> Result<OctaTile> {
    if position.coords.iter().all(|c| *c == 0.0) {
        return Err(Error::invalid("cannot map the zero vector to a tile"));
    }
    if !position.coords.iter().all(|c| c.is_finite()) {
        return Err(Error::invalid("camera position is not finite"));
    }
    let code =
        4 * (position.x < 0.0) as u8 + 2 * (position.y < 0.0) as u8 + (position.z < 0.0) as u8;
    Ok(OctaTile(code + 1))
}

/// Lattice export record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewRecord {
    pub index: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub tile: OctaTile,
}

pub fn view_records(views: &[Viewpoint]) -> Result<Vec<ViewRecord>> {
    views
        .iter()
        .map(|v| {
            Ok(ViewRecord {
                index: v.index,
                x: v.position.x,
                y: v.position.y,
                z: v.position.z,
                tile: map_to_tile(&v.position)?,
            })
        })
        .collect()
}
