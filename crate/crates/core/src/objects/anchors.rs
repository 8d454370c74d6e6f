use crate::geometry::{Point3, RigidTransform, Vec3};

/// A 20×20 mm socket on an element face, in the owner's local frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnchorFrame {
    /// 1..=5 on the base, 1..=8 on a cuboid.
    pub id: u8,
    /// Center of the socket square.
    pub center: Point3,
    /// Unit face normal; an attached cuboid's long axis points this way.
    pub outward: Vec3,
    /// In-plane reference axis. An attached cuboid's local +X is this axis
    /// turned by its quarter-turn count about `outward`.
    pub tangent: Vec3,
}

/// Five sockets on the top face (y = +10) of the base: three side by side at
/// the +X end, two at the −X end.
pub fn base_anchors() -> [AnchorFrame; 5] {
    let at = |id, x, z| AnchorFrame {
        id,
        center: Point3::new(x, 10.0, z),
        outward: Vec3::y(),
        tangent: Vec3::x(),
    };
    [
        at(1, 50.0, -20.0),
        at(2, 50.0, 0.0),
        at(3, 50.0, 20.0),
        at(4, -50.0, -15.0),
        at(5, -50.0, 15.0),
    ]
}

/// Eight sockets on a cuboid's four long faces, one at each end. Ids 1–4 sit
/// at the lower end (local y = −20) on faces +X, +Z, −X, −Z; ids 5–8 repeat
/// that at the upper end (y = +20). The 20×20 end faces carry no sockets.
pub fn cuboid_anchors() -> [AnchorFrame; 8] {
    let faces = [Vec3::x(), Vec3::z(), -Vec3::x(), -Vec3::z()];
    std::array::from_fn(|i| {
        let normal = faces[i % 4];
        let y = if i < 4 { -20.0 } else { 20.0 };
        AnchorFrame {
            id: i as u8 + 1,
            center: Point3::from(normal * 10.0 + Vec3::new(0.0, y, 0.0)),
            outward: normal,
            tangent: Vec3::y(),
        }
    })
}

/// Pose of a cuboid whose lower end face sits on `anchor` of an element at
/// `parent`, turned `turns` quarter turns about the anchor normal.
pub fn attachment_pose(parent: &RigidTransform, anchor: &AnchorFrame, turns: u8) -> RigidTransform {
    let n = parent.apply_vector(&anchor.outward);
    let mut t = parent.apply_vector(&anchor.tangent);
    for _ in 0..turns % 4 {
        t = n.cross(&t);
    }
    let rotation = nalgebra::Matrix3::from_columns(&[t, n, t.cross(&n)]);
    let center = parent.apply_point(&anchor.center) + n * (super::CUBOID_DIMENSIONS[1] / 2.0);
    RigidTransform {
        rotation,
        translation: center.coords,
    }
}

/// Quarter-turn count that reproduces `child` on `anchor`, if the child is
/// flush-mated there at all.
pub fn attachment_turns(
    parent: &RigidTransform,
    anchor: &AnchorFrame,
    child: &RigidTransform,
) -> Option<u8> {
    (0..4).find(|&q| attachment_pose(parent, anchor, q).distance(child) <= 1e-9)
}
