//! Blocks-world objects: one 120×20×60 mm base plate plus `n` 20×60×20 mm
//! cuboids, each cuboid standing end-on on an anchor square of the base or of
//! another cuboid.
//!
//! Object frame: origin at the base's center, +Y out of the base's top face,
//! +X toward the end with three base sockets, +Z across the plate.

mod anchors;
mod generate;
mod validate;

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geometry::{
    cuboid_mesh, union_boundary, Aabb, Point3, RigidTransform, TriMesh, Vec3,
    DEFAULT_CONTACT_TOLERANCE,
};
use crate::{Error, Result};

pub use anchors::{attachment_pose, attachment_turns, base_anchors, cuboid_anchors, AnchorFrame};
pub use generate::{
    generate_l1, generate_l2, rotate_subtree, L1_FIRST_CUBOID_COUNT, L1_LEVELS, L2_LEVELS,
    MAX_HEIGHT_STAGE, REFERENCE_SEED,
};
pub use validate::{validate, Rule, Violation, MIN_CLEARANCE};

/// Base plate extents along local X, Y, Z.
pub const BASE_DIMENSIONS: [f64; 3] = [120.0, 20.0, 60.0];
/// Cuboid extents along local X, Y (long axis), Z.
pub const CUBOID_DIMENSIONS: [f64; 3] = [20.0, 60.0, 20.0];
/// Height of one stage: an upright cuboid.
pub const STAGE_HEIGHT: f64 = 60.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Base,
    Cuboid,
}

impl ElementKind {
    pub fn dimensions(self) -> [f64; 3] {
        match self {
            ElementKind::Base => BASE_DIMENSIONS,
            ElementKind::Cuboid => CUBOID_DIMENSIONS,
        }
    }

    pub fn anchors(self) -> Vec<AnchorFrame> {
        match self {
            ElementKind::Base => base_anchors().to_vec(),
            ElementKind::Cuboid => cuboid_anchors().to_vec(),
        }
    }

    pub fn anchor(self, id: u8) -> Option<AnchorFrame> {
        self.anchors().into_iter().find(|a| a.id == id)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    L1,
    L2,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::L1 => "L1",
            Family::L2 => "L2",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssemblyNode {
    pub kind: ElementKind,
    /// Local-to-object transform.
    pub pose: RigidTransform,
    pub parent: Option<usize>,
    pub anchor: Option<u8>,
}

impl AssemblyNode {
    pub fn base() -> Self {
        Self {
            kind: ElementKind::Base,
            pose: RigidTransform::identity(),
            parent: None,
            anchor: None,
        }
    }

    /// World-space box. Poses are right-angle rotations, so this is the
    /// element's exact extent.
    pub fn aabb(&self) -> Aabb {
        let d = self.kind.dimensions();
        let local = Aabb {
            min: Point3::new(-d[0] / 2.0, -d[1] / 2.0, -d[2] / 2.0),
            max: Point3::new(d[0] / 2.0, d[1] / 2.0, d[2] / 2.0),
        };
        let mut b = Aabb::empty();
        for c in local.corners() {
            b.grow(&self.pose.apply_point(&c));
        }
        b
    }

    /// Unit direction of the element's local +Y axis.
    pub fn long_axis(&self) -> Vec3 {
        self.pose.apply_vector(&Vec3::y())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectSpec {
    pub id: String,
    pub family: Family,
    pub class_label: String,
    pub distractor_group: u32,
    pub nodes: Vec<AssemblyNode>,
}

impl ObjectSpec {
    /// Number of cuboids.
    pub fn n(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.kind == ElementKind::Cuboid)
            .count()
    }

    pub fn complexity(&self) -> usize {
        complexity(self)
    }

    /// Occupancy fingerprint: sorted element boxes on a 1e-6 mm lattice. Two
    /// specs with equal keys occupy exactly the same space.
    pub fn shape_key(&self) -> Vec<[i64; 6]> {
        let mut key: Vec<[i64; 6]> = self
            .nodes
            .iter()
            .map(|n| {
                let b = n.aabb();
                let q = |v: f64| (v * 1e6).round() as i64;
                [
                    q(b.min.x),
                    q(b.min.y),
                    q(b.min.z),
                    q(b.max.x),
                    q(b.max.y),
                    q(b.max.z),
                ]
            })
            .collect();
        key.sort_unstable();
        key
    }

    /// `(parent, anchor, quarter turns)` for every cuboid, in node order.
    /// `None` for nodes that are not flush-mated.
    pub fn attachments(&self) -> Vec<Option<(usize, u8, u8)>> {
        self.nodes
            .iter()
            .map(|node| {
                let (p, a) = (node.parent?, node.anchor?);
                let parent = self.nodes.get(p)?;
                let frame = parent.kind.anchor(a)?;
                let turns = attachment_turns(&parent.pose, &frame, &node.pose)?;
                Some((p, a, turns))
            })
            .collect()
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(p) = n.parent.filter(|&p| p < self.nodes.len()) {
                out[p].push(i);
            }
        }
        out
    }

    pub fn aabb(&self) -> Aabb {
        self.nodes
            .iter()
            .fold(Aabb::empty(), |b, n| b.merge(&n.aabb()))
    }

    pub fn to_json(&self) -> String {
        let doc = SpecDoc {
            id: self.id.clone(),
            family: self.family,
            class: self.class_label.clone(),
            distractor_group: self.distractor_group,
            n: self.n(),
            elements: self
                .nodes
                .iter()
                .map(|n| ElementDoc {
                    kind: n.kind,
                    parent: n.parent,
                    anchor: n.anchor,
                    pose: n.pose.to_row_major(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("spec serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SpecDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
            offset: 0,
            message: e.to_string(),
        })?;
        let nodes = doc
            .elements
            .iter()
            .map(|e| {
                Ok(AssemblyNode {
                    kind: e.kind,
                    pose: RigidTransform::from_row_major(&e.pose)?,
                    parent: e.parent,
                    anchor: e.anchor,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = ObjectSpec {
            id: doc.id,
            family: doc.family,
            class_label: doc.class,
            distractor_group: doc.distractor_group,
            nodes,
        };
        if spec.n() != doc.n {
            return Err(Error::invalid(format!(
                "spec {} declares n = {} but lists {} cuboids",
                spec.id,
                doc.n,
                spec.n()
            )));
        }
        Ok(spec)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct SpecDoc {
    id: String,
    family: Family,
    class: String,
    distractor_group: u32,
    n: usize,
    elements: Vec<ElementDoc>,
}

#[derive(Serialize, Deserialize)]
struct ElementDoc {
    kind: ElementKind,
    parent: Option<usize>,
    anchor: Option<u8>,
    pose: [f64; 16],
}

/// Element count: cuboids plus the base.
pub fn complexity(spec: &ObjectSpec) -> usize {
    spec.n() + 1
}

/// Number of 60 mm tiers above the base's top face reached by the tallest
/// part of the object. A bare base is stage 0, one upright cuboid stage 1,
/// and each further upright cuboid stacked via a horizontal one adds a stage.
pub fn height_stage(spec: &ObjectSpec) -> u32 {
    let Some(base) = spec.nodes.iter().find(|n| n.kind == ElementKind::Base) else {
        return 0;
    };
    let top = base.aabb().max.y;
    let peak = spec
        .nodes
        .iter()
        .filter(|n| n.kind == ElementKind::Cuboid)
        .map(|n| n.aabb().max.y)
        .fold(top, f64::max);
    ((peak - top) / STAGE_HEIGHT - 1e-9).ceil().max(0.0) as u32
}

/// Exterior surface of the assembled object.
pub fn assemble_mesh(spec: &ObjectSpec) -> Result<TriMesh> {
    let parts = spec
        .nodes
        .iter()
        .map(|n| cuboid_mesh(n.kind.dimensions(), &n.pose))
        .collect::<Result<Vec<_>>>()?;
    union_boundary(&parts, DEFAULT_CONTACT_TOLERANCE)
}

/// Groups specs by `distractor_group`, preserving order.
pub fn distractor_groups(specs: &[ObjectSpec]) -> Vec<(u32, Vec<&ObjectSpec>)> {
    let mut order = Vec::new();
    let mut map: HashMap<u32, Vec<&ObjectSpec>> = HashMap::new();
    for s in specs {
        if !map.contains_key(&s.distractor_group) {
            order.push(s.distractor_group);
        }
        map.entry(s.distractor_group).or_default().push(s);
    }
    order
        .into_iter()
        .map(|g| (g, map.remove(&g).unwrap()))
        .collect()
}
