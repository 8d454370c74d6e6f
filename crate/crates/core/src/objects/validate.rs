use std::collections::BTreeMap;
use std::fmt;

use super::{attachment_turns, ElementKind, ObjectSpec};

/// Non-mated elements must be at least this far apart.
pub const MIN_CLEARANCE: f64 = 1e-6;

/// Assembly rules, in the order they are checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    /// (a) exactly one base, with no parent.
    SingleBase,
    /// (b) every cuboid sits flush on an existing anchor of its parent.
    FlushMate,
    /// (c) a cuboid's long axis is orthogonal to its parent cuboid's.
    Orthogonal,
    /// (d) elements that are not parent and child do not touch or overlap.
    Clearance,
    /// (e) an anchor carries at most one cuboid.
    AnchorReuse,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub rule: Rule,
    pub nodes: Vec<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} (nodes {:?}): {}",
            self.rule, self.nodes, self.message
        )
    }
}

/// Checks every rule and reports all violations; `Ok` when there are none.
pub fn validate(spec: &ObjectSpec) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let nodes = &spec.nodes;

    let bases: Vec<usize> = (0..nodes.len())
        .filter(|&i| nodes[i].kind == ElementKind::Base)
        .collect();
    if bases.len() != 1 {
        out.push(Violation {
            rule: Rule::SingleBase,
            nodes: bases.clone(),
            message: format!("expected exactly one base, found {}", bases.len()),
        });
    }
    for &b in &bases {
        if nodes[b].parent.is_some() {
            out.push(Violation {
                rule: Rule::SingleBase,
                nodes: vec![b],
                message: "the base cannot have a parent".into(),
            });
        }
    }

    for (i, node) in nodes.iter().enumerate() {
        if node.kind != ElementKind::Cuboid {
            continue;
        }
        let flush = match (node.parent, node.anchor) {
            (Some(p), Some(a)) if p < nodes.len() && p != i => nodes[p]
                .kind
                .anchor(a)
                .and_then(|frame| attachment_turns(&nodes[p].pose, &frame, &node.pose))
                .is_some(),
            _ => false,
        };
        if !flush {
            out.push(Violation {
                rule: Rule::FlushMate,
                nodes: node.parent.map_or(vec![i], |p| vec![i, p]),
                message: format!("cuboid {i} is not flush on a valid anchor of its parent"),
            });
        }
    }

    for (i, node) in nodes.iter().enumerate() {
        let Some(p) = node.parent.filter(|&p| p < nodes.len()) else {
            continue;
        };
        if node.kind == ElementKind::Cuboid && nodes[p].kind == ElementKind::Cuboid {
            let dot = node.long_axis().dot(&nodes[p].long_axis());
            if dot.abs() > 1e-9 {
                out.push(Violation {
                    rule: Rule::Orthogonal,
                    nodes: vec![i, p],
                    message: format!("cuboid {i} is aligned with its parent {p}"),
                });
            }
        }
    }

    let boxes: Vec<_> = nodes.iter().map(|n| n.aabb()).collect();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let mated = nodes[i].parent == Some(j) || nodes[j].parent == Some(i);
            if mated {
                continue;
            }
            let gap = boxes[i].separation(&boxes[j]);
            if gap < MIN_CLEARANCE {
                out.push(Violation {
                    rule: Rule::Clearance,
                    nodes: vec![i, j],
                    message: if gap < 0.0 {
                        format!("elements {i} and {j} overlap")
                    } else {
                        format!("elements {i} and {j} touch (gap {gap})")
                    },
                });
            }
        }
    }

    let mut users: BTreeMap<(usize, u8), Vec<usize>> = BTreeMap::new();
    for (i, n) in nodes.iter().enumerate() {
        if let (Some(p), Some(a)) = (n.parent, n.anchor) {
            users.entry((p, a)).or_default().push(i);
        }
    }
    for ((p, a), who) in users {
        if who.len() > 1 {
            out.push(Violation {
                rule: Rule::AnchorReuse,
                nodes: who,
                message: format!("anchor {a} of element {p} is used more than once"),
            });
        }
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{RigidTransform, Vec3};
    use crate::objects::tests::{child, spec_with};
    use crate::objects::AssemblyNode;

    fn rules(spec: &ObjectSpec) -> Vec<Rule> {
        validate(spec)
            .err()
            .unwrap_or_default()
            .iter()
            .map(|v| v.rule)
            .collect()
    }

    #[test]
    fn single_upright_cuboid_is_valid() {
        let base = AssemblyNode::base();
        let c = child(&base, 0, 1, 0);
        assert_eq!(validate(&spec_with(vec![base, c])), Ok(()));
    }

    #[test]
    fn parallel_consecutive_cuboids_violate_orthogonality() {
        let base = AssemblyNode::base();
        let c1 = child(&base, 0, 2, 0);
        // Stacked end-to-end on top of c1: same direction as its parent.
        let c2 = AssemblyNode {
            pose: RigidTransform {
                translation: c1.pose.translation + Vec3::new(0.0, 60.0, 0.0),
                ..c1.pose
            },
            parent: Some(1),
            anchor: Some(5),
            ..c1.clone()
        };
        let r = rules(&spec_with(vec![base, c1, c2]));
        assert!(r.contains(&Rule::Orthogonal), "{r:?}");
    }

    #[test]
    fn overlapping_cuboids_violate_clearance() {
        let base = AssemblyNode::base();
        let c1 = child(&base, 0, 2, 0);
        let mut c2 = child(&base, 0, 1, 0);
        c2.pose.translation.z += 15.0;
        let r = rules(&spec_with(vec![base, c1, c2]));
        assert!(r.contains(&Rule::Clearance), "{r:?}");
    }

    #[test]
    fn adjacent_sockets_touch() {
        let base = AssemblyNode::base();
        let c1 = child(&base, 0, 1, 0);
        let c2 = child(&base, 0, 2, 0);
        let r = rules(&spec_with(vec![base.clone(), c1.clone(), c2]));
        assert_eq!(r, vec![Rule::Clearance]);
        // Sockets 1 and 3 leave a 20 mm gap.
        let c3 = child(&base, 0, 3, 0);
        assert_eq!(validate(&spec_with(vec![base, c1, c3])), Ok(()));
    }

    #[test]
    fn reused_anchor_and_missing_base() {
        let base = AssemblyNode::base();
        let c1 = child(&base, 0, 1, 0);
        let c2 = child(&base, 0, 1, 1);
        let r = rules(&spec_with(vec![base, c1.clone(), c2]));
        assert!(r.contains(&Rule::AnchorReuse), "{r:?}");
        let r = rules(&spec_with(vec![c1]));
        assert!(r.contains(&Rule::SingleBase), "{r:?}");
    }

    #[test]
    fn unmated_cuboid_is_flagged() {
        let base = AssemblyNode::base();
        let mut c1 = child(&base, 0, 1, 0);
        c1.pose.translation.y += 5.0;
        assert!(rules(&spec_with(vec![base, c1])).contains(&Rule::FlushMate));
    }
}
