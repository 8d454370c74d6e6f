//! Procedural blocks-world objects and their self-occlusion.
//!
//! The crate builds assemblies of one base plate and `n` cuboids from a small
//! attachment grammar, samples camera positions on a view sphere, measures how
//! much of each object's surface is hidden from every camera, and writes the
//! whole thing out as an annotated dataset.
//!
//! Module map:
//!
//! - [`geometry`]: triangle meshes, subdivision, boundary union, binary STL.
//! - [`objects`]: anchors, validity rules, complexity metrics and the seeded
//!   family generators.
//! - [`viewsphere`]: Fibonacci lattice, look-at cameras, octant tiles.
//! - [`occlusion`]: visible/hidden surface partition and the SO ratio.
//! - [`render`]: ray-cast binary masks and pixel boxes, PGM I/O.
//! - [`dataset`]: the generate / stats / validate pipeline.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bvh;
pub mod dataset;
mod error;
pub mod geometry;
pub mod objects;
pub mod occlusion;
pub mod render;
pub mod shapes;
pub mod viewsphere;

pub use error::{Error, Result};
pub use geometry::{Aabb, Point3, RigidTransform, TriMesh, Vec3};
