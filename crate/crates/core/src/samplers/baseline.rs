use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::UnitQuaternion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    register_mask_with, RegistrationOptions, RegistrationTarget, SegmentedCloud, SkillParams,
    SkillSampler, SamplerError,
};
use crate::analysis::{IcpParams, KdTree, PlaneParams};
use crate::geometry::{PointCloud, RigidTransform, Vec3};
use crate::scene::{Rect, Scene};
use crate::skills::{front_from_down, palm_pose, Arm, ContactPose, SkillType};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineParams {
    pub planes: PlaneParams,
    pub icp: IcpParams,
    pub antipodal_attempts: usize,
    /// Ray-march step, meters.
    pub antipodal_step: f64,
    /// Largest distance from the ray to an accepted partner point, meters.
    pub antipodal_tolerance: f64,
    /// Degrees.
    pub antipodal_angle: f64,
    /// Contacts must sit this far above the lowest observed point, meters.
    pub contact_clearance: f64,
    /// Degrees between a pull contact normal and +z.
    pub top_normal_angle: f64,
    /// Degrees between a push contact normal and the horizontal.
    pub side_normal_angle: f64,
    /// Degrees between the push direction and the inward contact normal.
    pub push_cone: f64,
    /// Push travel range, meters.
    pub push_distance: [f64; 2],
    /// Degrees.
    pub push_max_yaw: f64,
    /// Register grasp subgoals against the shelf instead of the table.
    pub use_shelf: bool,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            planes: PlaneParams::default(),
            icp: IcpParams::default(),
            antipodal_attempts: 200,
            antipodal_step: 0.002,
            antipodal_tolerance: 0.006,
            antipodal_angle: 20.0,
            contact_clearance: 0.015,
            top_normal_angle: 20.0,
            side_normal_angle: 30.0,
            push_cone: 30.0,
            push_distance: [0.03, 0.20],
            push_max_yaw: 30.0,
            use_shelf: false,
        }
    }
}

/// The hand-designed heuristics: antipodal grasps after registering a
/// random plane to the support, top-contact pulls to random planar poses,
/// and side-contact pushes.
#[derive(Clone, Debug)]
pub struct BaselineSampler {
    params: BaselineParams,
    target: RegistrationTarget,
    support: Rect,
}

impl BaselineSampler {
    pub fn new(scene: &Scene) -> Self {
        Self::with_params(scene, BaselineParams::default())
    }

    pub fn with_params(scene: &Scene, params: BaselineParams) -> Self {
        let (cloud, support) = match (params.use_shelf, scene.shelf) {
            (true, Some(shelf)) => (shelf.cloud(scene.support_spacing), shelf.rect),
            _ => (scene.table_cloud(), scene.table.rect),
        };
        Self {
            target: RegistrationTarget::new(&cloud),
            params,
            support,
        }
    }

    pub fn params(&self) -> &BaselineParams {
        &self.params
    }

    fn registration_options(&self) -> RegistrationOptions {
        RegistrationOptions {
            icp: self.params.icp.clone(),
            ..RegistrationOptions::default()
        }
    }

    /// Uniform centroid target on `rect`, kept a footprint radius from the
    /// edges when possible.
    fn planar_target(&self, rect: &Rect, cloud: &PointCloud, rng: &mut ChaCha8Rng) -> (f64, f64) {
        let c = cloud.centroid();
        let r = cloud
            .points()
            .iter()
            .map(|p| ((p.x - c.x).powi(2) + (p.y - c.y).powi(2)).sqrt())
            .fold(0.0, f64::max);
        let inner = rect.shrink(r);
        let area = if inner.is_empty() { *rect } else { inner };
        (
            uniform(rng, area.x_min, area.x_max),
            uniform(rng, area.y_min, area.y_max),
        )
    }

    fn grasp(&self, seg: &SegmentedCloud, scene: &Scene, rng: &mut ChaCha8Rng) -> Result<SkillParams, SamplerError> {
        if seg.planes.len() < 2 {
            return Err(SamplerError::DegenerateGeometry);
        }
        let down = -FRAC_PI_4.cos();
        let eligible: Vec<(usize, Vec3)> = (0..seg.planes.len())
            .filter_map(|i| seg.plane_normal(i).map(|n| (i, n)))
            .filter(|(_, n)| n.z > down)
            .collect();
        if eligible.is_empty() {
            return Err(SamplerError::DegenerateGeometry);
        }
        let (plane, normal) = eligible[rng.random_range(0..eligible.len())];
        let mask = seg.plane_mask(plane);
        let c = seg.cloud.centroid();
        let (tx, ty) = self.planar_target(&self.support, &seg.cloud, rng);
        let planar_init = RigidTransform::from_translation(Vec3::new(tx - c.x, ty - c.y, 0.0));
        let reg = register_mask_with(&seg.cloud, &mask, &self.target, &planar_init, &self.registration_options())?;

        let mut excluded = mask.clone();
        for j in 0..seg.planes.len() {
            if let Some(n) = seg.plane_normal(j) {
                if n.dot(&normal) < down {
                    for &k in seg.planes[j].iter() {
                        excluded[k] = true;
                    }
                }
            }
        }
        let contact = self.antipodal(seg, scene, &reg.transform, &excluded, rng)?;
        Ok(SkillParams {
            skill: SkillType::GraspReorient,
            subgoal: reg.transform,
            contact,
            mask: Some(mask),
        })
    }

    fn pick_place(&self, seg: &SegmentedCloud, scene: &Scene, rng: &mut ChaCha8Rng) -> Result<SkillParams, SamplerError> {
        let c = seg.cloud.centroid();
        let (tx, ty) = self.planar_target(&scene.workspace.regions.pick_place, &seg.cloud, rng);
        let subgoal = RigidTransform::from_translation(Vec3::new(tx - c.x, ty - c.y, 0.0));
        let excluded = vec![false; seg.cloud.len()];
        let contact = self.antipodal(seg, scene, &subgoal, &excluded, rng)?;
        Ok(SkillParams {
            skill: SkillType::PickPlace,
            subgoal,
            contact,
            mask: None,
        })
    }

    /// Antipodal palm pair on faces that stay vertical under `subgoal`.
    fn antipodal(
        &self,
        seg: &SegmentedCloud,
        scene: &Scene,
        subgoal: &RigidTransform,
        excluded: &[bool],
        rng: &mut ChaCha8Rng,
    ) -> Result<ContactPose, SamplerError> {
        let p = &self.params;
        let cloud = &seg.cloud;
        let pts = cloud.points();
        let normals = cloud.normals().ok_or(SamplerError::NoGrasp)?;
        let floor = cloud.min_z() + p.contact_clearance;
        let flat = FRAC_PI_4.cos();
        let usable: Vec<bool> = (0..pts.len())
            .map(|i| {
                !excluded[i]
                    && pts[i].z >= floor
                    && normals[i].z.abs() < flat
                    && subgoal.transform_vector(&normals[i]).z.abs() < flat
            })
            .collect();
        let candidates: Vec<usize> = (0..pts.len()).filter(|&i| usable[i]).collect();
        if candidates.len() < 2 {
            return Err(SamplerError::NoGrasp);
        }
        let tree = KdTree::build(pts);
        let (lo, hi) = cloud.bounds();
        let max_len = (hi - lo).norm();
        let steps = (max_len / p.antipodal_step).ceil() as usize;
        let cos_anti = p.antipodal_angle.to_radians().cos();
        let tol2 = p.antipodal_tolerance * p.antipodal_tolerance;
        for _ in 0..p.antipodal_attempts {
            let i = candidates[rng.random_range(0..candidates.len())];
            let (p1, n1) = (pts[i], normals[i]);
            let partner = (1..=steps).find_map(|k| {
                let q = p1 - n1 * (k as f64 * p.antipodal_step);
                let (j, d2) = tree.nearest(&q)?;
                let ok = d2 <= tol2
                    && usable[j]
                    && normals[j].dot(&n1) <= -cos_anti
                    && (pts[j] - p1).dot(&-n1) > 0.01;
                ok.then_some(j)
            });
            let Some(j) = partner else { continue };
            let p2 = pts[j];
            let front = front_from_down(&-n1, uniform(rng, -FRAC_PI_2, FRAC_PI_2));
            let palm1 = palm_pose(&-n1, &front, &p1);
            let palm2 = palm_pose(&n1, &front, &p2);
            return Ok(scene.workspace.assign_bimanual(palm1, palm2));
        }
        Err(SamplerError::NoGrasp)
    }

    fn pull_contact(&self, seg: &SegmentedCloud, rng: &mut ChaCha8Rng) -> Result<RigidTransform, SamplerError> {
        let pts = seg.cloud.points();
        let normals = seg.cloud.normals().ok_or(SamplerError::NoTopSurface)?;
        let cos_top = self.params.top_normal_angle.to_radians().cos();
        let top: Vec<usize> = (0..pts.len()).filter(|&i| normals[i].z >= cos_top).collect();
        if top.is_empty() {
            return Err(SamplerError::NoTopSurface);
        }
        let i = top[rng.random_range(0..top.len())];
        let theta = uniform(rng, -PI, PI);
        Ok(palm_pose(&-Vec3::z(), &Vec3::new(theta.cos(), theta.sin(), 0.0), &pts[i]))
    }

    fn push_contact(
        &self,
        seg: &SegmentedCloud,
        direction: Option<Vec3>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(RigidTransform, Vec3), SamplerError> {
        let pts = seg.cloud.points();
        let normals = seg.cloud.normals().ok_or(SamplerError::NoPushFace)?;
        let floor = seg.cloud.min_z() + self.params.contact_clearance;
        let max_tilt = self.params.side_normal_angle.to_radians().sin();
        let cos_cone = self.params.push_cone.to_radians().cos();
        let side: Vec<usize> = (0..pts.len())
            .filter(|&i| normals[i].z.abs() <= max_tilt && pts[i].z >= floor)
            .filter(|&i| match direction {
                Some(d) => inward(&normals[i]).dot(&d) >= cos_cone,
                None => true,
            })
            .collect();
        if side.is_empty() {
            return Err(SamplerError::NoPushFace);
        }
        let i = side[rng.random_range(0..side.len())];
        let n = normals[i];
        let front = front_from_down(&-n, uniform(rng, -FRAC_PI_2, FRAC_PI_2));
        Ok((palm_pose(&-n, &front, &pts[i]), inward(&n)))
    }
}

/// Horizontal unit direction into the object at a point with normal `n`.
fn inward(n: &Vec3) -> Vec3 {
    let h = Vec3::new(-n.x, -n.y, 0.0);
    if h.norm() < 1e-12 {
        Vec3::zeros()
    } else {
        h.normalize()
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Planar move of the cloud: yaw about its centroid, centroid sent to `to`.
pub(crate) fn planar_move(centroid: &Vec3, to_x: f64, to_y: f64, yaw: f64) -> RigidTransform {
    let rot = RigidTransform::from_rotation(UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw));
    RigidTransform::from_translation(Vec3::new(to_x, to_y, centroid.z))
        .compose(&rot)
        .compose(&RigidTransform::from_translation(-centroid))
        .project_se2()
}

fn pick_arm(scene: &Scene, palm: &RigidTransform, subgoal: &RigidTransform) -> Arm {
    let start = *palm.translation();
    scene.workspace.arm_for(&start, &subgoal.transform_point(&start))
}

impl SkillSampler for BaselineSampler {
    fn prepare(&self, observed: &PointCloud, scene: &Scene, seed: u64) -> Result<SegmentedCloud, SamplerError> {
        super::segment_observation(observed, scene, &self.params.planes, seed)
    }

    fn draw(&self, skill: SkillType, seg: &SegmentedCloud, scene: &Scene, seed: u64) -> Result<SkillParams, SamplerError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match skill {
            SkillType::GraspReorient => self.grasp(seg, scene, &mut rng),
            SkillType::PickPlace => self.pick_place(seg, scene, &mut rng),
            SkillType::PullLeft | SkillType::PullRight => {
                let palm = self.pull_contact(seg, &mut rng)?;
                let c = seg.cloud.centroid();
                let (tx, ty) = self.planar_target(&scene.table.rect, &seg.cloud, &mut rng);
                let yaw = uniform(&mut rng, -PI, PI);
                let subgoal = planar_move(&c, tx, ty, yaw);
                let arm = pick_arm(scene, &palm, &subgoal);
                Ok(SkillParams {
                    skill: skill.with_arm(arm),
                    subgoal,
                    contact: ContactPose::single(arm, palm),
                    mask: None,
                })
            }
            SkillType::PushLeft | SkillType::PushRight => {
                let (palm, dir) = self.push_contact(seg, None, &mut rng)?;
                let c = seg.cloud.centroid();
                let cone = self.params.push_cone.to_radians();
                let spin = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), uniform(&mut rng, -cone, cone));
                let d = spin * dir;
                let [lo, hi] = self.params.push_distance;
                let dist = uniform(&mut rng, lo, hi);
                let max_yaw = self.params.push_max_yaw.to_radians();
                let yaw = uniform(&mut rng, -max_yaw, max_yaw);
                let to = c + d * dist;
                let subgoal = planar_move(&c, to.x, to.y, yaw);
                let arm = pick_arm(scene, &palm, &subgoal);
                Ok(SkillParams {
                    skill: skill.with_arm(arm),
                    subgoal,
                    contact: ContactPose::single(arm, palm),
                    mask: None,
                })
            }
        }
    }

    fn draw_contact(
        &self,
        skill: SkillType,
        seg: &SegmentedCloud,
        scene: &Scene,
        subgoal: &RigidTransform,
        seed: u64,
    ) -> Result<(SkillType, ContactPose), SamplerError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match skill {
            SkillType::GraspReorient | SkillType::PickPlace => {
                let excluded = vec![false; seg.cloud.len()];
                Ok((skill, self.antipodal(seg, scene, subgoal, &excluded, &mut rng)?))
            }
            SkillType::PullLeft | SkillType::PullRight => {
                let palm = self.pull_contact(seg, &mut rng)?;
                let arm = pick_arm(scene, &palm, subgoal);
                Ok((skill.with_arm(arm), ContactPose::single(arm, palm)))
            }
            SkillType::PushLeft | SkillType::PushRight => {
                let c = seg.cloud.centroid();
                let moved = subgoal.transform_point(&c) - c;
                let d = Vec3::new(moved.x, moved.y, 0.0);
                let dir = (d.norm() > 0.005).then(|| d.normalize());
                let (palm, _) = self.push_contact(seg, dir, &mut rng)?;
                let arm = pick_arm(scene, &palm, subgoal);
                Ok((skill.with_arm(arm), ContactPose::single(arm, palm)))
            }
        }
    }
}
