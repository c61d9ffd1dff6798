//! Multi-step manipulation planning for rigid objects observed as point
//! clouds.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod feasibility;
pub mod geometry;
pub mod planner;
pub mod ply;
pub mod samplers;
pub mod scene;
pub mod sim;
pub mod skills;

pub use geometry::{CenteredCloud, PointCloud, RigidTransform, Vec3};
