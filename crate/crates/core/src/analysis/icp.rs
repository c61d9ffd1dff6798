use std::path::PathBuf;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::{AnalysisError, KdTree};
use crate::geometry::{PointCloud, RigidTransform, Vec3};
use crate::ply;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcpParams {
    /// Correspondence rejection distance, meters.
    pub max_corr_dist: f64,
    pub max_iters: usize,
    pub rel_rmse_tol: f64,
    /// Write the final correspondences to this PLY file (debugging aid).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dump_correspondences: Option<PathBuf>,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            max_corr_dist: 0.02,
            max_iters: 50,
            rel_rmse_tol: 1e-6,
            dump_correspondences: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IcpResult {
    pub transform: RigidTransform,
    /// Fraction of source points with a target neighbour within the
    /// correspondence distance.
    pub fitness: f64,
    /// Root of the mean truncated squared distance: every source point
    /// contributes `min(d², max_corr_dist²)`. Non-increasing over iterations.
    pub rmse: f64,
    /// RMSE over the matched points only.
    pub inlier_rmse: f64,
    pub iterations: usize,
    /// `rmse` at the initial transform and after each accepted update.
    pub rmse_history: Vec<f64>,
}

struct Matching {
    pairs: Vec<(usize, usize)>,
    truncated_sum: f64,
    inlier_sum: f64,
}

fn match_points(source: &[Vec3], tree: &KdTree, t: &RigidTransform, max_dist: f64) -> Matching {
    let max2 = max_dist * max_dist;
    let mut pairs = Vec::with_capacity(source.len());
    let mut truncated_sum = 0.0;
    let mut inlier_sum = 0.0;
    for (i, p) in source.iter().enumerate() {
        let q = t.transform_point(p);
        match tree.nearest(&q) {
            Some((j, d2)) if d2 <= max2 => {
                pairs.push((i, j));
                truncated_sum += d2;
                inlier_sum += d2;
            }
            _ => truncated_sum += max2,
        }
    }
    Matching {
        pairs,
        truncated_sum,
        inlier_sum,
    }
}

/// Least-squares rigid transform mapping `src[i]` onto `dst[i]` (Kabsch with
/// reflection correction).
pub fn kabsch(src: &[Vec3], dst: &[Vec3]) -> RigidTransform {
    assert_eq!(src.len(), dst.len());
    assert!(!src.is_empty());
    let n = src.len() as f64;
    let cs: Vec3 = src.iter().sum::<Vec3>() / n;
    let cd: Vec3 = dst.iter().sum::<Vec3>() / n;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s - cs) * (d - cd).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("u requested");
    let mut v = svd.v_t.expect("v_t requested").transpose();
    let mut r = v * u.transpose();
    if r.determinant() < 0.0 {
        let smallest = svd.singular_values.imin();
        let mut col = v.column_mut(smallest);
        col *= -1.0;
        r = v * u.transpose();
    }
    let rot = nalgebra::Rotation3::from_matrix_unchecked(r);
    let q = nalgebra::UnitQuaternion::from_rotation_matrix(&rot);
    RigidTransform::new(q, cd - q * cs)
}

/// Point-to-point ICP from `init`. Builds a k-d tree over `target` per call.
pub fn icp_point_to_point(
    source: &PointCloud,
    target: &PointCloud,
    init: &RigidTransform,
    max_corr_dist: f64,
    max_iters: usize,
    rel_rmse_tol: f64,
) -> Result<IcpResult, AnalysisError> {
    let tree = KdTree::build(target.points());
    icp_with_index(
        source,
        &tree,
        init,
        &IcpParams {
            max_corr_dist,
            max_iters,
            rel_rmse_tol,
            dump_correspondences: None,
        },
    )
}

/// ICP against a prebuilt target index.
pub fn icp_with_index(
    source: &PointCloud,
    target: &KdTree,
    init: &RigidTransform,
    params: &IcpParams,
) -> Result<IcpResult, AnalysisError> {
    if !(params.max_corr_dist > 0.0) {
        return Err(AnalysisError::InvalidParameter("max_corr_dist must be positive"));
    }
    if source.is_empty() || target.is_empty() {
        return Err(AnalysisError::InsufficientPoints {
            needed: 1,
            available: 0,
        });
    }
    let src = source.points();
    let n = src.len() as f64;
    let mut transform = *init;
    let mut current = match_points(src, target, &transform, params.max_corr_dist);
    if current.pairs.is_empty() {
        return Err(AnalysisError::NoOverlap { best_effort: *init });
    }
    let mut rmse = (current.truncated_sum / n).sqrt();
    let mut history = vec![rmse];
    let mut iterations = 0;

    while iterations < params.max_iters.max(1) {
        iterations += 1;
        let (a, b): (Vec<Vec3>, Vec<Vec3>) = current
            .pairs
            .iter()
            .map(|&(i, j)| (transform.transform_point(&src[i]), target.points()[j]))
            .unzip();
        let step = kabsch(&a, &b);
        let candidate = step.compose(&transform);
        let next = match_points(src, target, &candidate, params.max_corr_dist);
        if next.truncated_sum > current.truncated_sum {
            // only possible through round-off once converged
            break;
        }
        let next_rmse = (next.truncated_sum / n).sqrt();
        transform = candidate;
        current = next;
        history.push(next_rmse);
        let converged = rmse == 0.0 || next_rmse == 0.0 || (rmse - next_rmse) / rmse < params.rel_rmse_tol;
        rmse = next_rmse;
        if converged {
            break;
        }
    }

    if let Some(path) = &params.dump_correspondences {
        if let Err(e) = dump_pairs(path, src, target, &transform, &current.pairs) {
            log::warn!("could not write ICP correspondences to {}: {e}", path.display());
        }
    }

    let matched = current.pairs.len();
    Ok(IcpResult {
        transform,
        fitness: matched as f64 / n,
        rmse,
        inlier_rmse: if matched > 0 {
            (current.inlier_sum / matched as f64).sqrt()
        } else {
            0.0
        },
        iterations,
        rmse_history: history,
    })
}

fn dump_pairs(
    path: &std::path::Path,
    src: &[Vec3],
    target: &KdTree,
    t: &RigidTransform,
    pairs: &[(usize, usize)],
) -> std::io::Result<()> {
    // mask = 1 for transformed source points, 0 for their matches
    let mut pts = Vec::with_capacity(pairs.len() * 2);
    let mut mask = Vec::with_capacity(pairs.len() * 2);
    for &(i, j) in pairs {
        pts.push(t.transform_point(&src[i]));
        mask.push(true);
        pts.push(target.points()[j]);
        mask.push(false);
    }
    let cloud = PointCloud::new(pts)
        .and_then(|c| c.with_mask(mask))
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    ply::save_ply(&cloud, path)
}
