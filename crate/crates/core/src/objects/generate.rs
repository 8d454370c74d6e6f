//! Seeded growth of the two object families.
//!
//! Objects grow one cuboid at a time. Each step picks uniformly among all
//! legal `(parent, anchor, quarter turn)` placements, in a fixed enumeration
//! order shuffled by a SplitMix64 stream. A dead end (no placement, or no way
//! to build the required distractors at a checkpoint) backtracks depth-first.
//!
//! A distractor is the same object with one cuboid turned about its own long
//! axis. Turning a cuboid with nothing attached changes nothing, so only
//! cuboids that carry children qualify; their subtree swings around with
//! them. Candidates are tried smallest subtree first, then quarter turns
//! 1, 2, 3, and the first ones that stay valid and differ in occupied space
//! are kept.

use std::collections::HashSet;

use nalgebra::Matrix3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::SplitMix64;

use super::{
    attachment_pose, validate, AssemblyNode, ElementKind, Family, ObjectSpec, MIN_CLEARANCE,
    STAGE_HEIGHT,
};
use crate::geometry::{Aabb, RigidTransform};
use crate::{Error, Result};

/// Seed of the reference families shipped with the repository.
pub const REFERENCE_SEED: u64 = 0x7E05;

/// L1: 18 levels starting at two cuboids (complexity 3) and ending at 19.
pub const L1_LEVELS: usize = 18;
pub const L1_FIRST_CUBOID_COUNT: usize = 2;

/// L2 levels as (name, cuboid count): 7, 10 and 18 elements.
pub const L2_LEVELS: [(&str, usize); 3] = [("easy", 6), ("medium", 9), ("hard", 17)];
const L2_VARIANTS: usize = 4;

pub const MAX_HEIGHT_STAGE: u32 = 4;

/// Separate stream for L2 so the two families do not share random draws.
const L2_STREAM: u64 = 0x4C32_4C32_4C32_4C32;

/// Expansion budget for the depth-first search.
const SEARCH_BUDGET: usize = 250_000;

/// Bottom of the base plate; nothing may hang below it.
const GROUND_Y: f64 = -10.0;
/// Top of the base plate.
const BASE_TOP_Y: f64 = 10.0;

/// 36 objects: for each of 18 levels a growth-chain object and its distractor.
/// Level `k` (1-based) has `k + 1` cuboids; object ids are `l1_01`..`l1_36`
/// with the chain object at odd and the distractor at even numbers.
pub fn generate_l1(seed: u64) -> Result<Vec<ObjectSpec>> {
    let last = L1_FIRST_CUBOID_COUNT + L1_LEVELS - 1;
    let need = |n: usize| usize::from(n >= L1_FIRST_CUBOID_COUNT);
    let chain = grow_chain(seed, seed, last, &need)?;

    let mut out = Vec::with_capacity(2 * L1_LEVELS);
    for level in 1..=L1_LEVELS {
        let n = L1_FIRST_CUBOID_COUNT + level - 1;
        let nodes = chain[..=n].to_vec();
        let variants = distractors(&nodes, 1);
        let make = |idx: usize, nodes: Vec<AssemblyNode>| {
            let id = format!("l1_{:02}", 2 * (level - 1) + idx + 1);
            ObjectSpec {
                class_label: id.clone(),
                id,
                family: Family::L1,
                distractor_group: level as u32,
                nodes,
            }
        };
        let twin = variants
            .into_iter()
            .next()
            .ok_or_else(|| Error::GenerationFailure {
                seed,
                message: format!("no distractor for level {level}"),
            })?;
        out.push(make(0, nodes));
        out.push(make(1, twin));
    }
    Ok(out)
}

/// 12 objects: three levels (6, 9 and 17 cuboids) of one growth chain, each
/// with three distractors. Ids `l2_01`..`l2_12`, four per level.
pub fn generate_l2(seed: u64) -> Result<Vec<ObjectSpec>> {
    let last = L2_LEVELS[L2_LEVELS.len() - 1].1;
    let need = |n: usize| {
        if L2_LEVELS.iter().any(|&(_, c)| c == n) {
            L2_VARIANTS - 1
        } else {
            0
        }
    };
    let chain = grow_chain(seed ^ L2_STREAM, seed, last, &need)?;

    let mut out = Vec::with_capacity(L2_LEVELS.len() * L2_VARIANTS);
    for (li, &(_, n)) in L2_LEVELS.iter().enumerate() {
        let nodes = chain[..=n].to_vec();
        let mut variants = vec![nodes.clone()];
        variants.extend(distractors(&nodes, L2_VARIANTS - 1));
        if variants.len() != L2_VARIANTS {
            return Err(Error::GenerationFailure {
                seed,
                message: format!("level {} has only {} variants", li + 1, variants.len()),
            });
        }
        for (vi, nodes) in variants.into_iter().enumerate() {
            let id = format!("l2_{:02}", li * L2_VARIANTS + vi + 1);
            out.push(ObjectSpec {
                class_label: id.clone(),
                id,
                family: Family::L2,
                distractor_group: li as u32 + 1,
                nodes,
            });
        }
    }
    Ok(out)
}

/// Node list of the base plus `target` cuboids such that after every step
/// with `need(n) > 0` cuboids, at least `need(n)` distinct distractors exist.
fn grow_chain(
    stream_seed: u64,
    seed: u64,
    target: usize,
    need: &dyn Fn(usize) -> usize,
) -> Result<Vec<AssemblyNode>> {
    let mut rng = SplitMix64::seed_from_u64(stream_seed);
    let mut nodes = vec![AssemblyNode::base()];
    let mut budget = SEARCH_BUDGET;
    if search(&mut nodes, target, need, &mut rng, &mut budget, seed)? {
        Ok(nodes)
    } else {
        Err(Error::GenerationFailure {
            seed,
            message: format!("no assembly with {target} cuboids satisfies the rules"),
        })
    }
}

fn search(
    nodes: &mut Vec<AssemblyNode>,
    target: usize,
    need: &dyn Fn(usize) -> usize,
    rng: &mut SplitMix64,
    budget: &mut usize,
    seed: u64,
) -> Result<bool> {
    let n = nodes.len() - 1;
    let required = need(n);
    if required > 0 && distractors(nodes, required).len() < required {
        return Ok(false);
    }
    if n == target {
        return Ok(true);
    }
    if *budget == 0 {
        return Err(Error::GenerationFailure {
            seed,
            message: format!("search budget of {SEARCH_BUDGET} expansions exhausted"),
        });
    }
    *budget -= 1;
    let mut candidates = placements(nodes);
    candidates.shuffle(rng);
    for node in candidates {
        nodes.push(node);
        if search(nodes, target, need, rng, budget, seed)? {
            return Ok(true);
        }
        nodes.pop();
    }
    Ok(false)
}

/// Every legal next cuboid, in node, anchor, turn order.
fn placements(nodes: &[AssemblyNode]) -> Vec<AssemblyNode> {
    let boxes: Vec<Aabb> = nodes.iter().map(AssemblyNode::aabb).collect();
    let used: HashSet<(usize, u8)> = nodes
        .iter()
        .filter_map(|n| Some((n.parent?, n.anchor?)))
        .collect();
    let mut out = Vec::new();
    for (p, parent) in nodes.iter().enumerate() {
        for anchor in parent.kind.anchors() {
            if used.contains(&(p, anchor.id)) {
                continue;
            }
            let probe = AssemblyNode {
                kind: ElementKind::Cuboid,
                pose: attachment_pose(&parent.pose, &anchor, 0),
                parent: Some(p),
                anchor: Some(anchor.id),
            };
            let b = probe.aabb();
            if !within_envelope(&b) {
                continue;
            }
            let clear = boxes
                .iter()
                .enumerate()
                .all(|(j, other)| j == p || b.separation(other) >= MIN_CLEARANCE);
            if !clear {
                continue;
            }
            // The child's own box ignores its turn; the turn decides where
            // its future anchors face.
            for turns in 0..4 {
                out.push(AssemblyNode {
                    pose: attachment_pose(&parent.pose, &anchor, turns),
                    ..probe.clone()
                });
            }
        }
    }
    out
}

/// Rests on the base's bottom plane and stays within four stages.
fn within_envelope(b: &Aabb) -> bool {
    b.min.y >= GROUND_Y - 1e-9
        && b.max.y <= BASE_TOP_Y + STAGE_HEIGHT * MAX_HEIGHT_STAGE as f64 + 1e-9
}

fn generator_rules_hold(nodes: &[AssemblyNode]) -> bool {
    let spec = ObjectSpec {
        id: String::new(),
        family: Family::L1,
        class_label: String::new(),
        distractor_group: 0,
        nodes: nodes.to_vec(),
    };
    validate(&spec).is_ok() && nodes.iter().all(|n| within_envelope(&n.aabb()))
}

/// Up to `want` distractors of `nodes`, pairwise distinct in occupied space
/// and distinct from `nodes` itself.
fn distractors(nodes: &[AssemblyNode], want: usize) -> Vec<Vec<AssemblyNode>> {
    let spec_key = |nodes: &[AssemblyNode]| {
        ObjectSpec {
            id: String::new(),
            family: Family::L1,
            class_label: String::new(),
            distractor_group: 0,
            nodes: nodes.to_vec(),
        }
        .shape_key()
    };
    let mut seen = HashSet::from([spec_key(nodes)]);
    let mut out = Vec::new();
    for (pivot, _) in pivot_order(nodes) {
        for quarter in 1..4 {
            let turned = rotate_subtree(nodes, pivot, quarter);
            if !generator_rules_hold(&turned) {
                continue;
            }
            if seen.insert(spec_key(&turned)) {
                out.push(turned);
                if out.len() == want {
                    return out;
                }
            }
        }
    }
    out
}

/// Cuboids that carry children, smallest subtree first, later nodes first
/// among equals.
fn pivot_order(nodes: &[AssemblyNode]) -> Vec<(usize, usize)> {
    let mut sizes = vec![1usize; nodes.len()];
    for i in (1..nodes.len()).rev() {
        if let Some(p) = nodes[i].parent {
            sizes[p] += sizes[i];
        }
    }
    let mut order: Vec<(usize, usize)> = (0..nodes.len())
        .filter(|&i| nodes[i].kind == ElementKind::Cuboid && sizes[i] > 1)
        .map(|i| (i, sizes[i]))
        .collect();
    order.sort_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)));
    order
}

/// Turns node `pivot` and everything attached below it by `quarter` right
/// angles about the pivot's long axis through its center. Requires parents to
/// precede their children in `nodes`.
pub fn rotate_subtree(nodes: &[AssemblyNode], pivot: usize, quarter: u8) -> Vec<AssemblyNode> {
    let axis = nodes[pivot].long_axis();
    let center = nodes[pivot].pose.translation;
    // Quarter turn about a unit axis: v -> a(a·v) + a × v.
    let step = axis * axis.transpose() + axis.cross_matrix();
    let mut turn = Matrix3::identity();
    for _ in 0..quarter % 4 {
        turn = step * turn;
    }
    let mut in_subtree = vec![false; nodes.len()];
    in_subtree[pivot] = true;
    let mut out = nodes.to_vec();
    for i in pivot..nodes.len() {
        if i != pivot && !nodes[i].parent.is_some_and(|p| in_subtree[p]) {
            continue;
        }
        in_subtree[i] = true;
        let pose = &nodes[i].pose;
        out[i].pose = RigidTransform {
            rotation: turn * pose.rotation,
            translation: center + turn * (pose.translation - center),
        };
    }
    out
}
