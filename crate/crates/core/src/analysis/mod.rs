//! Geometric perception over point clouds: neighbour search, normal
//! estimation, RANSAC plane segmentation and point-to-point ICP.

mod icp;
mod kdtree;
mod normals;
mod planes;

pub use icp::{icp_point_to_point, icp_with_index, kabsch, IcpParams, IcpResult};
pub use kdtree::KdTree;
pub use normals::{estimate_normals, DEFAULT_NORMAL_NEIGHBORS};
pub use planes::{ransac_iterations, segment_planes, Plane, PlaneParams};
pub(crate) use planes::fit_plane;

use thiserror::Error;

use crate::geometry::{PointCloud, RigidTransform, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("insufficient points: need {needed}, cloud has {available}")]
    InsufficientPoints { needed: usize, available: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    /// No source point had a target neighbour within the correspondence
    /// distance at the initial transform. Carries the initial guess.
    #[error("no overlap between source and target at the initial transform")]
    NoOverlap { best_effort: RigidTransform },
}

/// Indices of the `k` nearest points to `query`, nearest first, ties broken by
/// lower index.
pub fn knn(cloud: &PointCloud, query: &Vec3, k: usize) -> Result<Vec<usize>, AnalysisError> {
    if k == 0 {
        return Err(AnalysisError::InvalidParameter("k must be at least 1"));
    }
    if k > cloud.len() {
        return Err(AnalysisError::InsufficientPoints {
            needed: k,
            available: cloud.len(),
        });
    }
    let tree = KdTree::build(cloud.points());
    Ok(tree.nearest_k(query, k).into_iter().map(|(i, _)| i).collect())
}
