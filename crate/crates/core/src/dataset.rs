//! Dataset orchestration: generate families, place cameras, measure
//! self-occlusion, render masks, and write everything to a directory tree.
//!
//! Layout under the output directory:
//!
//! ```text
//! objects/<id>.json        assembly spec
//! meshes/<id>.stl          exterior surface, binary STL
//! masks/<id>/<view>.pgm    binary mask per view
//! annotations.jsonl        one row per (object, view)
//! occlusion.csv            object_id,view_index,tile,so
//! manifest.json            config echo, tool version, per-object entries
//! ```
//!
//! Every file is a pure function of the config.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{read_stl, write_stl, RigidTransform};
use crate::objects::{
    assemble_mesh, generate_l1, generate_l2, validate, ObjectSpec, REFERENCE_SEED,
};
use crate::occlusion::{
    camera_for, summarize, OcclusionRecord, OcclusionScene, Summary, ViewDistance, DEFAULT_MAX_EDGE,
};
use crate::render::{
    bounding_box, default_vfov, read_mask, write_mask, MaskRenderer, PixelBox, DEFAULT_RESOLUTION,
};
use crate::viewsphere::{fibonacci_lattice, map_to_tile, OctaTile, DEFAULT_VIEW_COUNT};
use crate::{Error, Point3, Result};

pub const TOOL_NAME: &str = "blocksworld";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Views rendered concurrently before their results are written.
const VIEW_BATCH: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilySet {
    L1,
    L2,
    Both,
}

impl FromStr for FamilySet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(FamilySet::L1),
            "l2" => Ok(FamilySet::L2),
            "both" => Ok(FamilySet::Both),
            _ => Err(Error::invalid(format!(
                "unknown family {s:?}; expected l1, l2 or both"
            ))),
        }
    }
}

impl fmt::Display for FamilySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FamilySet::L1 => "l1",
            FamilySet::L2 => "l2",
            FamilySet::Both => "both",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub seed: u64,
    pub family: FamilySet,
    pub views: usize,
    /// Camera distance as a multiple of the object's bounding radius.
    pub radius_factor: f64,
    /// Subdivision edge limit for occlusion, mm.
    pub max_edge: f64,
    /// Mask side length, pixels.
    pub resolution: usize,
    pub out: PathBuf,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            seed: REFERENCE_SEED,
            family: FamilySet::Both,
            views: DEFAULT_VIEW_COUNT,
            radius_factor: 2.0,
            max_edge: DEFAULT_MAX_EDGE,
            resolution: DEFAULT_RESOLUTION,
            out: PathBuf::from("dataset"),
        }
    }
}

impl DatasetConfig {
    /// Flat JSON object; omitted fields take their defaults.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn check(&self) -> Result<()> {
        if self.views == 0 {
            return Err(Error::invalid("views must be at least 1"));
        }
        if !(self.radius_factor > 1.0) || !self.radius_factor.is_finite() {
            return Err(Error::invalid(format!(
                "radius_factor {} must exceed 1",
                self.radius_factor
            )));
        }
        if !(self.max_edge > 0.0) || !self.max_edge.is_finite() {
            return Err(Error::invalid(format!(
                "max_edge {} must be positive",
                self.max_edge
            )));
        }
        if self.resolution == 0 {
            return Err(Error::invalid("resolution must be at least 1"));
        }
        Ok(())
    }

    pub fn vfov(&self) -> Result<f64> {
        default_vfov(self.radius_factor)
    }

    pub fn specs(&self) -> Result<Vec<ObjectSpec>> {
        Ok(match self.family {
            FamilySet::L1 => generate_l1(self.seed)?,
            FamilySet::L2 => generate_l2(self.seed)?,
            FamilySet::Both => {
                let mut v = generate_l1(self.seed)?;
                v.extend(generate_l2(self.seed)?);
                v
            }
        })
    }
}

/// One line of `annotations.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRow {
    pub object_id: String,
    /// Class label.
    pub object_type: String,
    pub family: String,
    pub complexity: usize,
    pub view_id: usize,
    /// `None` when the object misses every pixel.
    pub bbox: Option<PixelBox>,
    /// Object-to-world, row-major 4×4.
    pub object_pose: [f64; 16],
    /// Camera-to-world, row-major 4×4; the camera looks down its local −Z.
    pub camera_pose: [f64; 16],
    /// Axis-aligned extents of the object, mm.
    pub object_dimensions: [f64; 3],
    pub so: f64,
    pub tile: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestObject {
    pub id: String,
    pub family: String,
    pub class: String,
    pub complexity: usize,
    pub spec: String,
    pub stl: String,
    pub masks: String,
    /// Half-open range of this object's lines in `annotations.jsonl`.
    pub annotation_lines: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub tool: String,
    pub version: String,
    pub config: DatasetConfig,
    pub vfov_deg: f64,
    pub rows: usize,
    pub objects: Vec<ManifestObject>,
}

#[derive(Clone, Debug)]
pub struct GenerateReport {
    pub manifest: DatasetManifest,
    pub records: Vec<OcclusionRecord>,
}

fn mask_name(view: usize) -> String {
    format!("{view:04}.pgm")
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn camera_matrix(camera: &crate::viewsphere::CameraPose) -> [f64; 16] {
    RigidTransform {
        rotation: camera.rotation,
        translation: camera.position.coords,
    }
    .to_row_major()
}

/// Builds the full dataset under `config.out`.
pub fn cmd_generate(config: &DatasetConfig) -> Result<GenerateReport> {
    config.check()?;
    let vfov = config.vfov()?;
    let specs = config.specs()?;
    let viewpoints = fibonacci_lattice(config.views, 1.0)?;
    let framing = ViewDistance::BoundingRadiusMultiple(config.radius_factor);

    let root = &config.out;
    for dir in ["objects", "meshes", "masks"] {
        create_dir(&root.join(dir))?;
    }
    let ann_path = root.join("annotations.jsonl");
    let csv_path = root.join("occlusion.csv");
    let open = |p: &Path| {
        fs::File::create(p)
            .map(BufWriter::new)
            .map_err(|e| Error::io(p, e))
    };
    let mut ann = open(&ann_path)?;
    let mut csv = open(&csv_path)?;
    writeln!(csv, "object_id,view_index,tile,so").map_err(|e| Error::io(&csv_path, e))?;

    let mut objects = Vec::with_capacity(specs.len());
    let mut records = Vec::with_capacity(specs.len() * config.views);
    for spec in &specs {
        let spec_rel = format!("objects/{}.json", spec.id);
        let stl_rel = format!("meshes/{}.stl", spec.id);
        let mask_rel = format!("masks/{}", spec.id);
        write_file(&root.join(&spec_rel), spec.to_json().as_bytes())?;
        let mesh = assemble_mesh(spec)?;
        write_stl(&mesh, root.join(&stl_rel))?;
        let mask_dir = root.join(&mask_rel);
        create_dir(&mask_dir)?;

        let scene = OcclusionScene::new(&mesh, config.max_edge)?;
        let renderer = MaskRenderer::new(&mesh);
        let extents = spec.aabb().extents();
        let start = records.len();
        for batch in viewpoints.chunks(VIEW_BATCH) {
            let results: Vec<_> = batch
                .par_iter()
                .map(|vp| {
                    let wrap = |e: Error| Error::View {
                        object: spec.id.clone(),
                        view: vp.index,
                        source: Box::new(e),
                    };
                    let camera = camera_for(&mesh, framing, vp).map_err(wrap)?;
                    let so = scene.self_occlusion(&camera).map_err(wrap)?;
                    let tile = map_to_tile(&camera.position).map_err(wrap)?;
                    let mask = renderer
                        .render(&camera, config.resolution, vfov)
                        .map_err(wrap)?;
                    Ok((vp.index, camera, so, tile, mask))
                })
                .collect::<Result<_>>()?;
            for (view, camera, so, tile, mask) in results {
                write_mask(&mask, mask_dir.join(mask_name(view)))?;
                let row = AnnotationRow {
                    object_id: spec.id.clone(),
                    object_type: spec.class_label.clone(),
                    family: spec.family.to_string(),
                    complexity: spec.complexity(),
                    view_id: view,
                    bbox: bounding_box(&mask),
                    object_pose: RigidTransform::identity().to_row_major(),
                    camera_pose: camera_matrix(&camera),
                    object_dimensions: extents.into(),
                    so,
                    tile: tile.id(),
                };
                let line = serde_json::to_string(&row).expect("row serializes");
                writeln!(ann, "{line}").map_err(|e| Error::io(&ann_path, e))?;
                writeln!(csv, "{},{},{},{}", spec.id, view, tile.id(), so)
                    .map_err(|e| Error::io(&csv_path, e))?;
                records.push(OcclusionRecord {
                    object_id: spec.id.clone(),
                    view_index: view,
                    so,
                    tile,
                    camera_position: camera.position.coords.into(),
                });
            }
        }
        objects.push(ManifestObject {
            id: spec.id.clone(),
            family: spec.family.to_string(),
            class: spec.class_label.clone(),
            complexity: spec.complexity(),
            spec: spec_rel,
            stl: stl_rel,
            masks: mask_rel,
            annotation_lines: [start, records.len()],
        });
    }
    ann.flush().map_err(|e| Error::io(&ann_path, e))?;
    csv.flush().map_err(|e| Error::io(&csv_path, e))?;

    let manifest = DatasetManifest {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        config: config.clone(),
        vfov_deg: vfov,
        rows: records.len(),
        objects,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write_file(&root.join("manifest.json"), text.as_bytes())?;
    Ok(GenerateReport { manifest, records })
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = dir.as_ref().join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path, source })
}

pub fn read_annotations(dir: impl AsRef<Path>) -> Result<Vec<AnnotationRow>> {
    let path = dir.as_ref().join("annotations.jsonl");
    let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut rows = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(&path, e))?;
        if line.is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).map_err(|source| Error::Json {
            path: path.clone(),
            source,
        })?;
        rows.push(row);
    }
    Ok(rows)
}

/// `(object_id, view_index) -> (tile, so)` from `occlusion.csv`.
pub fn read_occlusion_csv(dir: impl AsRef<Path>) -> Result<BTreeMap<(String, usize), (u8, f64)>> {
    let path = dir.as_ref().join("occlusion.csv");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let bad = |line: usize, message: String| Error::Format {
        path: path.clone(),
        message: format!("line {line}: {message}"),
    };
    let mut lines = text.lines();
    if lines.next() != Some("object_id,view_index,tile,so") {
        return Err(bad(1, "unexpected header".into()));
    }
    let mut out = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        let [id, view, tile, so] = cells[..] else {
            return Err(bad(
                i + 2,
                format!("expected 4 fields, found {}", cells.len()),
            ));
        };
        let view = view
            .parse()
            .map_err(|_| bad(i + 2, format!("bad view index {view:?}")))?;
        let tile = tile
            .parse()
            .map_err(|_| bad(i + 2, format!("bad tile {tile:?}")))?;
        let so = so
            .parse()
            .map_err(|_| bad(i + 2, format!("bad so {so:?}")))?;
        out.insert((id.to_string(), view), (tile, so));
    }
    Ok(out)
}

fn records_of(rows: &[AnnotationRow]) -> Result<Vec<OcclusionRecord>> {
    rows.iter()
        .map(|r| {
            Ok(OcclusionRecord {
                object_id: r.object_id.clone(),
                view_index: r.view_id,
                so: r.so,
                tile: OctaTile::new(r.tile)?,
                camera_position: [r.camera_pose[3], r.camera_pose[7], r.camera_pose[11]],
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct StatsReport {
    pub by_class: Summary,
    pub by_level: Summary,
    pub files: Vec<PathBuf>,
}

/// Writes SO summaries to `<dir>/stats/`: per class, per complexity level,
/// per tile, and histograms per class and per level.
pub fn cmd_stats(dir: impl AsRef<Path>) -> Result<StatsReport> {
    let dir = dir.as_ref();
    let rows = read_annotations(dir)?;
    let records = records_of(&rows)?;
    let class: HashMap<&str, &str> = rows
        .iter()
        .map(|r| (r.object_id.as_str(), r.object_type.as_str()))
        .collect();
    let level: HashMap<&str, usize> = rows
        .iter()
        .map(|r| (r.object_id.as_str(), r.complexity))
        .collect();
    let by_class = summarize(&records, |r| class[r.object_id.as_str()].to_string())?;
    let by_level = summarize(&records, |r| format!("{:02}", level[r.object_id.as_str()]))?;

    let out = dir.join("stats");
    create_dir(&out)?;
    let tables = [
        ("so_by_class.csv", by_class.group_csv("class")),
        ("so_by_level.csv", by_level.group_csv("complexity")),
        ("so_by_tile.csv", by_class.tile_csv()),
        ("histogram_by_class.csv", by_class.histogram_csv("class")),
        (
            "histogram_by_level.csv",
            by_level.histogram_csv("complexity"),
        ),
    ];
    let mut files = Vec::new();
    for (name, text) in tables {
        let path = out.join(name);
        write_file(&path, text.as_bytes())?;
        files.push(path);
    }
    Ok(StatsReport {
        by_class,
        by_level,
        files,
    })
}

/// One problem found by `cmd_validate`.
#[derive(Clone, Debug, PartialEq)]
pub struct Issue {
    pub path: PathBuf,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.message)
    }
}

/// Error text without the path, which `Issue` already carries.
fn cause(e: &Error) -> String {
    match e {
        Error::Io { source, .. } => source.to_string(),
        Error::Json { source, .. } => source.to_string(),
        Error::Format { message, .. } => message.clone(),
        other => other.to_string(),
    }
}

/// Re-checks a dataset directory and reports every problem found.
pub fn cmd_validate(dir: impl AsRef<Path>) -> std::result::Result<(), Vec<Issue>> {
    let dir = dir.as_ref();
    let mut issues = Vec::new();
    let mut issue = |path: PathBuf, message: String| issues.push(Issue { path, message });

    let manifest = match read_manifest(dir) {
        Ok(m) => m,
        Err(e) => {
            issue(dir.join("manifest.json"), cause(&e));
            return Err(issues);
        }
    };
    let ann_path = dir.join("annotations.jsonl");
    let rows = read_annotations(dir).unwrap_or_else(|e| {
        issue(ann_path.clone(), cause(&e));
        Vec::new()
    });
    let csv = read_occlusion_csv(dir).unwrap_or_else(|e| {
        issue(dir.join("occlusion.csv"), cause(&e));
        BTreeMap::new()
    });

    let views = manifest.config.views;
    let res = manifest.config.resolution;
    let expected = manifest.objects.len() * views;
    if manifest.rows != expected {
        issue(
            dir.join("manifest.json"),
            format!("manifest lists {} rows, expected {expected}", manifest.rows),
        );
    }
    if rows.len() != expected {
        issue(
            ann_path.clone(),
            format!("{} annotation rows, expected {expected}", rows.len()),
        );
    }
    if csv.len() != expected {
        issue(
            dir.join("occlusion.csv"),
            format!("{} occlusion rows, expected {expected}", csv.len()),
        );
    }

    let mut masks_of: HashMap<&str, &str> = HashMap::new();
    for obj in &manifest.objects {
        masks_of.insert(&obj.id, &obj.masks);
        match ObjectSpec::read(dir.join(&obj.spec)) {
            Ok(spec) => {
                if let Err(v) = validate(&spec) {
                    issue(dir.join(&obj.spec), format!("invalid assembly: {}", v[0]));
                }
            }
            Err(e) => issue(dir.join(&obj.spec), cause(&e)),
        }
        match read_stl(dir.join(&obj.stl)) {
            Ok(mesh) if mesh.is_empty() => {
                issue(dir.join(&obj.stl), "mesh has no triangles".into())
            }
            Ok(_) => {}
            Err(e) => issue(dir.join(&obj.stl), cause(&e)),
        }
    }

    for (i, row) in rows.iter().enumerate() {
        let at = |what: String| (ann_path.clone(), format!("line {}: {what}", i + 1));
        let mut report = |what: String| {
            let (p, m) = at(what);
            issue(p, m);
        };
        if !(0.0..=1.0).contains(&row.so) {
            report(format!("so {} is outside [0, 1]", row.so));
        }
        if row.view_id >= views {
            report(format!("view_id {} is not below {views}", row.view_id));
        }
        let eye = Point3::new(row.camera_pose[3], row.camera_pose[7], row.camera_pose[11]);
        match map_to_tile(&eye) {
            Ok(t) if t.id() == row.tile => {}
            Ok(t) => report(format!(
                "tile {} but camera lies in tile {}",
                row.tile,
                t.id()
            )),
            Err(e) => report(e.to_string()),
        }
        if let Some(b) = row.bbox {
            if b.x_min > b.x_max || b.y_min > b.y_max || b.x_max >= res || b.y_max >= res {
                report(format!("bbox {b:?} is outside the {res}x{res} image"));
            }
        }
        match csv.get(&(row.object_id.clone(), row.view_id)) {
            Some(&(tile, so)) if tile == row.tile && so == row.so => {}
            Some(_) => report("differs from occlusion.csv".into()),
            None => report("missing from occlusion.csv".into()),
        }
        let Some(mask_dir) = masks_of.get(row.object_id.as_str()) else {
            report(format!("object {} is not in the manifest", row.object_id));
            continue;
        };
        let mask_path = dir.join(mask_dir).join(mask_name(row.view_id));
        match read_mask(&mask_path) {
            Ok(m) if m.width() != res || m.height() != res => issue(
                mask_path,
                format!("mask is {}x{}, expected {res}x{res}", m.width(), m.height()),
            ),
            Ok(m) if bounding_box(&m) != row.bbox => {
                issue(mask_path, "mask does not match the annotated bbox".into())
            }
            Ok(_) => {}
            Err(e) => issue(mask_path, cause(&e)),
        }
    }

    if issues.is_empty() {
        Ok(())
    } else {
        Err(issues)
    }
}
