//! Self-occlusion: the share of an object's surface area that a camera cannot
//! see because the object itself is in the way.
//!
//! The surface is cut into small faces. A face counts as visible when it faces
//! the camera and nothing lies on the segment from the camera to its
//! centroid; everything else is hidden. `SO = hidden area / total area`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bvh::Bvh;
use crate::geometry::{subdivide_with_parents, surface_area, Point3, TriMesh};
use crate::objects::{assemble_mesh, ObjectSpec};
use crate::viewsphere::{look_at, map_to_tile, CameraPose, OctaTile, Viewpoint};
use crate::{Error, Result};

/// Subdivision used for dataset runs.
pub const DEFAULT_MAX_EDGE: f64 = 2.0;

/// Occluder hits closer than this fraction of the scene diameter to the target
/// centroid are ignored.
const HIT_EPSILON: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct VisibilityPartition {
    pub visible: TriMesh,
    pub hidden: TriMesh,
    pub visible_area: f64,
    pub hidden_area: f64,
}

impl VisibilityPartition {
    pub fn self_occlusion(&self) -> f64 {
        self.hidden_area / (self.visible_area + self.hidden_area)
    }
}

/// A mesh prepared for repeated visibility queries: subdivided once, with a
/// BVH over the fine faces.
pub struct OcclusionScene {
    source: TriMesh,
    fine: TriMesh,
    areas: Vec<f64>,
    centroids: Vec<Point3>,
    total_area: f64,
    bvh: Bvh,
    hit_epsilon: f64,
}

impl OcclusionScene {
    /// Checks the mesh is closed with positive area, then subdivides it to
    /// `max_edge`.
    pub fn new(mesh: &TriMesh, max_edge: f64) -> Result<Self> {
        if surface_area(mesh) <= 0.0 {
            return Err(Error::invalid("mesh has zero surface area"));
        }
        if !mesh.is_closed() {
            return Err(Error::invalid("mesh is not closed"));
        }
        let fine = subdivide_with_parents(mesh, max_edge)?.mesh;
        let areas: Vec<f64> = (0..fine.len()).map(|f| fine.triangle_area(f)).collect();
        let centroids = (0..fine.len()).map(|f| fine.centroid(f)).collect();
        let total_area = areas.iter().sum();
        let diameter = mesh.aabb().extents().norm();
        let bvh = Bvh::new(&fine);
        Ok(Self {
            source: mesh.clone(),
            fine,
            areas,
            centroids,
            total_area,
            bvh,
            hit_epsilon: HIT_EPSILON * diameter,
        })
    }

    /// The subdivided surface the classification runs on.
    pub fn fine_mesh(&self) -> &TriMesh {
        &self.fine
    }

    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    /// Per fine face: true if visible from `camera`.
    pub fn classify(&self, camera: &CameraPose) -> Result<Vec<bool>> {
        if self.source.winding_number(&camera.position) > 0.5 {
            return Err(Error::invalid("camera is inside the mesh"));
        }
        let eye = camera.position;
        let forward = camera.forward();
        Ok((0..self.fine.len())
            .into_par_iter()
            .map(|f| {
                let c = self.centroids[f];
                let to_eye = eye - c;
                if self.fine.normals()[f].dot(&to_eye) <= 0.0 {
                    return false;
                }
                // Behind the image plane: outside any view frustum.
                if forward.dot(&(c - eye)) <= 0.0 {
                    return false;
                }
                let dir = c - eye;
                let len = dir.norm();
                let t_max = 1.0 - self.hit_epsilon / len;
                !self.bvh.any_hit(&eye, &dir, 0.0, t_max, Some(f as u32))
            })
            .collect())
    }

    pub fn partition(&self, camera: &CameraPose) -> Result<VisibilityPartition> {
        let flags = self.classify(camera)?;
        let (visible_area, hidden_area) = self.split_areas(&flags);
        let vis = flags
            .iter()
            .enumerate()
            .filter(|(_, v)| **v)
            .map(|(f, _)| f);
        let hid = flags
            .iter()
            .enumerate()
            .filter(|(_, v)| !**v)
            .map(|(f, _)| f);
        Ok(VisibilityPartition {
            visible: self.fine.select_faces(vis),
            hidden: self.fine.select_faces(hid),
            visible_area,
            hidden_area,
        })
    }

    pub fn self_occlusion(&self, camera: &CameraPose) -> Result<f64> {
        let flags = self.classify(camera)?;
        let (_, hidden) = self.split_areas(&flags);
        Ok((hidden / self.total_area).clamp(0.0, 1.0))
    }

    /// Sequential sums in face order, so results do not depend on threading.
    fn split_areas(&self, flags: &[bool]) -> (f64, f64) {
        let mut visible = 0.0;
        let mut hidden = 0.0;
        for (a, v) in self.areas.iter().zip(flags) {
            if *v {
                visible += a;
            } else {
                hidden += a;
            }
        }
        (visible, hidden)
    }
}

pub fn visible_partition(
    mesh: &TriMesh,
    camera: &CameraPose,
    max_edge: f64,
) -> Result<VisibilityPartition> {
    OcclusionScene::new(mesh, max_edge)?.partition(camera)
}

/// `SO = A_hidden / A_total` for one camera.
pub fn self_occlusion(mesh: &TriMesh, camera: &CameraPose, max_edge: f64) -> Result<f64> {
    OcclusionScene::new(mesh, max_edge)?.self_occlusion(camera)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OcclusionRecord {
    pub object_id: String,
    pub view_index: usize,
    pub so: f64,
    pub tile: OctaTile,
    pub camera_position: [f64; 3],
}

/// How viewpoint positions are turned into camera positions per object.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ViewDistance {
    /// Use viewpoint positions as given.
    Absolute,
    /// Rescale each viewpoint direction to this multiple of the object's
    /// bounding radius about the origin.
    BoundingRadiusMultiple(f64),
}

/// Camera distance for an object under the given framing rule.
pub fn camera_distance(mesh: &TriMesh, rule: ViewDistance, viewpoint: &Viewpoint) -> f64 {
    match rule {
        ViewDistance::Absolute => viewpoint.position.coords.norm(),
        ViewDistance::BoundingRadiusMultiple(k) => k * mesh.bounding_radius(&Point3::origin()),
    }
}

/// Camera looking at the object origin from `viewpoint` under `rule`.
pub fn camera_for(mesh: &TriMesh, rule: ViewDistance, viewpoint: &Viewpoint) -> Result<CameraPose> {
    let dir = viewpoint.position.coords;
    let dist = camera_distance(mesh, rule, viewpoint);
    let position = Point3::from(dir / dir.norm() * dist);
    look_at(&position, &Point3::origin())
}

/// One record per (object, view), object-major. Views of one object are
/// evaluated in parallel; output order is fixed.
pub fn occlusion_table(
    specs: &[ObjectSpec],
    viewpoints: &[Viewpoint],
    max_edge: f64,
    distance: ViewDistance,
) -> Result<Vec<OcclusionRecord>> {
    let mut out = Vec::with_capacity(specs.len() * viewpoints.len());
    for spec in specs {
        let mesh = assemble_mesh(spec)?;
        let scene = OcclusionScene::new(&mesh, max_edge)?;
        let rows: Result<Vec<_>> = viewpoints
            .iter()
            .map(|vp| {
                let wrap = |e: Error| Error::View {
                    object: spec.id.clone(),
                    view: vp.index,
                    source: Box::new(e),
                };
                let camera = camera_for(&mesh, distance, vp).map_err(wrap)?;
                let so = scene.self_occlusion(&camera).map_err(wrap)?;
                Ok(OcclusionRecord {
                    object_id: spec.id.clone(),
                    view_index: vp.index,
                    so,
                    tile: map_to_tile(&camera.position).map_err(wrap)?,
                    camera_position: camera.position.coords.into(),
                })
            })
            .collect();
        out.extend(rows?);
    }
    Ok(out)
}

/// Histogram bin labels in percent: `<50`, five-point bins up to 85, `>=85`.
pub const HISTOGRAM_BINS: [&str; 9] = [
    "<50", "50-55", "55-60", "60-65", "65-70", "70-75", "75-80", "80-85", ">=85",
];

pub fn histogram_bin(so: f64) -> usize {
    let pct = so * 100.0;
    if pct < 50.0 {
        0
    } else if pct >= 85.0 {
        8
    } else {
        1 + ((pct - 50.0) / 5.0).floor() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoStats {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub histogram: [usize; 9],
}

impl SoStats {
    fn from_values(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut count = 0;
        let mut sum = 0.0;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut histogram = [0; 9];
        for v in values {
            count += 1;
            sum += v;
            min = min.min(v);
            max = max.max(v);
            histogram[histogram_bin(v)] += 1;
        }
        (count > 0).then(|| SoStats {
            count,
            mean: sum / count as f64,
            min,
            max,
            histogram,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub overall: SoStats,
    pub per_group: BTreeMap<String, SoStats>,
    pub per_tile: BTreeMap<OctaTile, SoStats>,
}

/// Aggregates records by a caller-chosen key (object class, complexity level,
/// ...) and by octahedral tile.
pub fn summarize<F>(records: &[OcclusionRecord], group_of: F) -> Result<Summary>
where
    F: Fn(&OcclusionRecord) -> String,
{
    let overall = SoStats::from_values(records.iter().map(|r| r.so))
        .ok_or_else(|| Error::invalid("cannot summarize an empty record set"))?;
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut tiles: BTreeMap<OctaTile, Vec<f64>> = BTreeMap::new();
    for r in records {
        groups.entry(group_of(r)).or_default().push(r.so);
        tiles.entry(r.tile).or_default().push(r.so);
    }
    let collect = |v: Vec<f64>| SoStats::from_values(v).expect("non-empty group");
    Ok(Summary {
        overall,
        per_group: groups.into_iter().map(|(k, v)| (k, collect(v))).collect(),
        per_tile: tiles.into_iter().map(|(k, v)| (k, collect(v))).collect(),
    })
}

impl Summary {
    pub fn group_csv(&self, key_name: &str) -> String {
        let mut s = format!("{key_name},count,mean,min,max\n");
        for (k, st) in &self.per_group {
            s.push_str(&format!(
                "{k},{},{},{},{}\n",
                st.count, st.mean, st.min, st.max
            ));
        }
        s
    }

    pub fn tile_csv(&self) -> String {
        let mut s = String::from("tile,count,mean,min,max\n");
        for (t, st) in &self.per_tile {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                t.id(),
                st.count,
                st.mean,
                st.min,
                st.max
            ));
        }
        s
    }

    /// One row per group plus an `all` row; one column per bin.
    pub fn histogram_csv(&self, key_name: &str) -> String {
        let mut s = format!("{key_name},{}\n", HISTOGRAM_BINS.join(","));
        let row = |name: &str, st: &SoStats| {
            let cells: Vec<String> = st.histogram.iter().map(|c| c.to_string()).collect();
            format!("{name},{}\n", cells.join(","))
        };
        for (k, st) in &self.per_group {
            s.push_str(&row(k, st));
        }
        s.push_str(&row("all", &self.overall));
        s
    }

    /// Tile with the smallest mean SO, if it is strictly smaller than every
    /// other tile's mean.
    pub fn unique_min_tile(&self) -> Option<OctaTile> {
        let mut tiles: Vec<(OctaTile, f64)> =
            self.per_tile.iter().map(|(t, s)| (*t, s.mean)).collect();
        tiles.sort_by(|a, b| a.1.total_cmp(&b.1));
        match tiles.as_slice() {
            [only] => Some(only.0),
            [first, second, ..] if first.1 < second.1 => Some(first.0),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{cuboid_mesh, RigidTransform, Vec3};
    use crate::shapes::{cube, icosphere};

    fn cam(p: [f64; 3]) -> CameraPose {
        look_at(&Point3::from(p), &Point3::origin()).unwrap()
    }

    #[test]
    fn cube_face_on_shows_one_face() {
        let mesh = cube(20.0);
        let part = visible_partition(&mesh, &cam([0.0, 0.0, 60.0]), 1.0).unwrap();
        assert!((part.visible_area - 400.0).abs() < 1e-6);
        assert!((part.self_occlusion() - 5.0 / 6.0).abs() < 1e-9);
        let total = surface_area(&mesh);
        assert!(((part.visible_area + part.hidden_area) - total).abs() <= 1e-6 * total);
        assert!((surface_area(&part.visible) - part.visible_area).abs() < 1e-6);
    }

    #[test]
    fn sphere_matches_cap_formula() {
        let mesh = icosphere(4, 0.5);
        let so = self_occlusion(&mesh, &cam([0.0, 0.0, 2.0]), 0.025).unwrap();
        assert!((so - 0.625).abs() < 0.01, "so = {so}");
    }

    #[test]
    fn occluder_hides_the_surface_behind_it() {
        // A plate in front of a block, seen head-on: the block's near face is
        // fully shadowed by the plate.
        let block = cuboid_mesh([10.0, 10.0, 10.0], &RigidTransform::identity()).unwrap();
        let plate = cuboid_mesh(
            [20.0, 20.0, 2.0],
            &RigidTransform::from_translation(Vec3::new(0.0, 0.0, 20.0)),
        )
        .unwrap();
        let both = TriMesh::concat(&[block, plate]);
        let part = visible_partition(&both, &cam([0.0, 0.0, 200.0]), 1.0).unwrap();
        assert!(
            (part.visible_area - 400.0).abs() < 1e-6,
            "visible {}",
            part.visible_area
        );
    }

    #[test]
    fn camera_inside_is_rejected() {
        let mesh = cube(20.0);
        let inside = CameraPose {
            position: Point3::new(0.0, 0.0, 1.0),
            ..cam([0.0, 0.0, 5.0])
        };
        assert!(matches!(
            self_occlusion(&mesh, &inside, 1.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn open_and_empty_meshes_are_rejected() {
        let open = cube(20.0).select_faces(0..11);
        assert!(matches!(
            self_occlusion(&open, &cam([0.0, 0.0, 60.0]), 1.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            self_occlusion(&TriMesh::empty(), &cam([0.0, 0.0, 60.0]), 1.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn histogram_bins_follow_five_point_grouping() {
        assert_eq!(histogram_bin(0.4999), 0);
        assert_eq!(histogram_bin(0.5), 1);
        assert_eq!(histogram_bin(0.5499), 1);
        assert_eq!(histogram_bin(0.55), 2);
        assert_eq!(histogram_bin(0.8499), 7);
        assert_eq!(histogram_bin(0.85), 8);
        assert_eq!(histogram_bin(1.0), 8);
    }

    #[test]
    fn summary_of_one_record() {
        let r = OcclusionRecord {
            object_id: "a".into(),
            view_index: 0,
            so: 0.7,
            tile: OctaTile::new(3).unwrap(),
            camera_position: [1.0, -1.0, 1.0],
        };
        let s = summarize(std::slice::from_ref(&r), |r| r.object_id.clone()).unwrap();
        assert_eq!(s.overall.mean, 0.7);
        assert_eq!(s.overall.min, 0.7);
        assert_eq!(s.overall.max, 0.7);
        assert_eq!(s.per_group["a"].count, 1);
        assert_eq!(s.unique_min_tile(), Some(OctaTile::new(3).unwrap()));
        assert_eq!(s.overall.histogram.iter().sum::<usize>(), 1);
        assert!(summarize(&[], |r| r.object_id.clone()).is_err());
    }
}
