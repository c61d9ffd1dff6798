//! Skill-parameter samplers behind one interface: hand-designed baseline
//! heuristics, mask-based subgoal registration, and a replay sampler.

mod baseline;
mod registration;
mod replay;

pub use baseline::{BaselineParams, BaselineSampler};
pub(crate) use baseline::planar_move;
pub use registration::{
    body_horizontal_axes, register_mask_subgoal, register_mask_with, Registration,
    RegistrationOptions, RegistrationTarget, MIN_MASK_POINTS,
};
pub use replay::{parse_replay, write_replay_record, ReplayRecord, ReplaySampler};

use std::sync::Arc;

use thiserror::Error;

use crate::analysis::{estimate_normals, fit_plane, segment_planes, AnalysisError, PlaneParams, DEFAULT_NORMAL_NEIGHBORS};
use crate::geometry::{PointCloud, RigidTransform, Vec3};
use crate::scene::Scene;
use crate::skills::{ContactPose, SkillType};

/// One sampled skill invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct SkillParams {
    pub skill: SkillType,
    pub subgoal: RigidTransform,
    pub contact: ContactPose,
    /// Points of the source cloud meant to end on the support surface.
    pub mask: Option<Vec<bool>>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("no grasp found")]
    NoGrasp,
    #[error("degenerate geometry: fewer than two planes")]
    DegenerateGeometry,
    #[error("no top surface")]
    NoTopSurface,
    #[error("no push face")]
    NoPushFace,
    #[error("registration failed: {0}")]
    Registration(String),
    #[error("mask selects {0} points, need at least 10")]
    MaskTooSmall(usize),
    #[error("mask has {mask} entries for a cloud of {cloud} points")]
    MaskLength { mask: usize, cloud: usize },
    #[error("no recorded parameters for {0}")]
    NoRecord(SkillType),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// A cloud with normals plus the planar segments found on it. The segment
/// index lists stay valid for any rigidly moved copy, so planning nodes share
/// them instead of re-segmenting.
#[derive(Clone, Debug)]
pub struct SegmentedCloud {
    pub cloud: PointCloud,
    pub planes: Arc<[Vec<usize>]>,
}

impl SegmentedCloud {
    pub fn transformed(&self, t: &RigidTransform) -> SegmentedCloud {
        SegmentedCloud {
            cloud: self.cloud.transformed(t),
            planes: Arc::clone(&self.planes),
        }
    }

    /// Outward unit normal of plane `i` in the current frame, from the mean
    /// of its point normals.
    pub fn plane_normal(&self, i: usize) -> Option<Vec3> {
        let normals = self.cloud.normals()?;
        let sum: Vec3 = self.planes[i].iter().map(|&j| normals[j]).sum();
        (sum.norm() > 1e-12).then(|| sum.normalize())
    }

    pub fn plane_mask(&self, i: usize) -> Vec<bool> {
        let mut mask = vec![false; self.cloud.len()];
        for &j in self.planes[i].iter() {
            mask[j] = true;
        }
        mask
    }
}

/// Normals and plane segmentation shared by every sampler.
pub fn segment_observation(
    observed: &PointCloud,
    scene: &Scene,
    plane_params: &PlaneParams,
    seed: u64,
) -> Result<SegmentedCloud, SamplerError> {
    let cloud = match observed.normals() {
        Some(_) => observed.clone(),
        None => orient_outward(estimate_normals(
            observed,
            DEFAULT_NORMAL_NEIGHBORS.min(observed.len()),
            &scene.camera_positions(),
        )?),
    };
    let planes = segment_planes(&cloud, plane_params, seed)?
        .into_iter()
        .map(|p| tighten_plane(cloud.points(), p.inlier_indices))
        .collect::<Vec<_>>();
    Ok(SegmentedCloud {
        cloud,
        planes: planes.into(),
    })
}

/// Drops inliers farther than `max(1 mm, 2.5 σ)` from the refitted plane,
/// σ the median-absolute-deviation estimate. Removes the strips of adjacent
/// faces that a RANSAC band picks up along edges.
fn tighten_plane(pts: &[Vec3], idx: Vec<usize>) -> Vec<usize> {
    let Some((n, d)) = fit_plane(pts, &idx) else {
        return idx;
    };
    let mut dist: Vec<f64> = idx.iter().map(|&i| (n.dot(&pts[i]) - d).abs()).collect();
    let keep_dist = dist.clone();
    dist.sort_by(f64::total_cmp);
    let sigma = 1.4826 * dist[dist.len() / 2];
    let cut = (2.5 * sigma).max(0.001);
    let kept: Vec<usize> = idx.iter().zip(&keep_dist).filter(|(_, &e)| e <= cut).map(|(&i, _)| i).collect();
    if kept.len() >= 3 {
        kept
    } else {
        idx
    }
}

/// Flips normals to point away from the centroid. A face seen only by a
/// far camera would otherwise face inwards.
fn orient_outward(cloud: PointCloud) -> PointCloud {
    let c = cloud.centroid();
    let normals: Vec<Vec3> = cloud
        .points()
        .iter()
        .zip(cloud.normals().expect("estimated"))
        .map(|(p, n)| if n.dot(&(p - c)) < 0.0 { -n } else { *n })
        .collect();
    cloud.with_normals(normals).expect("same length")
}

/// Source of skill parameters for the planner. Implementations must be
/// deterministic in their inputs and seed.
pub trait SkillSampler: Send + Sync {
    /// One-time preprocessing of the observed cloud.
    fn prepare(&self, observed: &PointCloud, scene: &Scene, seed: u64) -> Result<SegmentedCloud, SamplerError> {
        segment_observation(observed, scene, &PlaneParams::default(), seed)
    }

    /// Subgoal and contact for one invocation of `skill`. Single-arm skills
    /// may come back with either arm.
    fn draw(&self, skill: SkillType, cloud: &SegmentedCloud, scene: &Scene, seed: u64)
        -> Result<SkillParams, SamplerError>;

    /// Contact only, for a subgoal fixed in advance. Returns the skill
    /// actually used (the arm may differ from `skill`'s).
    fn draw_contact(
        &self,
        skill: SkillType,
        cloud: &SegmentedCloud,
        scene: &Scene,
        subgoal: &RigidTransform,
        seed: u64,
    ) -> Result<(SkillType, ContactPose), SamplerError>;
}
