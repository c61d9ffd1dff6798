use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::objects::{execute_subgoals, random_half_extents, sample_stable_pose_in, ExecuteOptions};
use super::synthesis::synthesize_cloud;
use super::metrics::PoseError;
use crate::feasibility::{check_motion, satisfies_preconditions};
use crate::geometry::{PointCloud, RigidTransform, Vec3};
use crate::samplers::{planar_move, ReplayRecord};
use crate::scene::{Cuboid, Face, Scene};
use crate::skills::{front_from_down, generate_path, palm_pose, skill_admits, ContactPose, PathParams, SkillType};

/// Points ending closer than this to the support are labeled as mask points.
pub const MASK_DISTANCE: f64 = 0.01;

/// Contacts stay this far above the support, meters.
const CONTACT_CLEARANCE: f64 = 0.015;

/// Fraction of a face half-size kept free at its border when placing
/// contacts.
const FACE_MARGIN: f64 = 0.8;

const PUSH_DISTANCE: (f64, f64) = (0.03, 0.20);
const PUSH_CONE: f64 = 30.0 * PI / 180.0;
const PUSH_MAX_YAW: f64 = 30.0 * PI / 180.0;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSample {
    pub skill: SkillType,
    pub cloud: PointCloud,
    pub subgoal: RigidTransform,
    pub contact: ContactPose,
    pub mask: Vec<bool>,
    pub object: Cuboid,
}

impl TrainingSample {
    pub fn to_replay(&self) -> ReplayRecord {
        ReplayRecord {
            skill: self.skill,
            subgoal: self.subgoal,
            contact: self.contact,
            mask_indices: (0..self.mask.len()).filter(|&i| self.mask[i]).collect(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingYield {
    pub attempts: usize,
    pub precondition: usize,
    pub no_contact: usize,
    pub not_admitted: usize,
    pub infeasible: usize,
    pub off_target: usize,
    pub emitted: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingData {
    pub samples: Vec<TrainingSample>,
    pub stats: TrainingYield,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingOptions {
    pub dense_points: usize,
    /// Attempts per requested sample before giving up on an object.
    pub attempts_per_sample: usize,
    pub path: PathParams,
}

impl Default for TrainingOptions {
    fn default() -> Self {
        Self {
            dense_points: 600,
            attempts_per_sample: 50,
            path: PathParams::default(),
        }
    }
}

pub fn generate_training_data(n_objects: usize, n_samples: usize, skill: SkillType, scene: &Scene, seed: u64) -> TrainingData {
    generate_training_data_with(n_objects, n_samples, skill, scene, seed, &TrainingOptions::default())
}

/// Stable-pose transitions with mesh contacts, filtered by the planner's
/// feasibility check.
pub fn generate_training_data_with(
    n_objects: usize,
    n_samples: usize,
    skill: SkillType,
    scene: &Scene,
    seed: u64,
    opts: &TrainingOptions,
) -> TrainingData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = TrainingYield::default();
    let mut samples = Vec::new();
    let n_objects = n_objects.max(1);
    let supports: Vec<_> = scene.shelf.into_iter().collect();
    for obj in 0..n_objects {
        let quota = (n_samples - samples.len()).div_ceil(n_objects - obj);
        let half = random_half_extents(&mut rng);
        let mut kept = 0;
        for _ in 0..quota * opts.attempts_per_sample {
            if kept == quota {
                break;
            }
            stats.attempts += 1;
            let ws = &scene.workspace;
            let h = scene.table.height;
            let start = Cuboid::new(half, sample_stable_pose_in(&half, ws.regions.for_skill(skill), h, &mut rng));
            let Some((skill, subgoal, contact)) = transition(skill, &start, scene, &mut rng) else {
                stats.no_contact += 1;
                continue;
            };
            let cloud = synthesize_cloud(scene, &start, opts.dense_points, rng.random()).dense;
            if !satisfies_preconditions(skill, &cloud, ws) {
                stats.precondition += 1;
                continue;
            }
            if !skill_admits(skill, &subgoal) {
                stats.not_admitted += 1;
                continue;
            }
            let feasible = generate_path(skill, &contact, &subgoal, &opts.path)
                .map(|path| check_motion(&path, &cloud, &subgoal, ws, &supports).feasible())
                .unwrap_or(false);
            if !feasible {
                stats.infeasible += 1;
                continue;
            }
            let goal = subgoal.compose(&start.pose);
            let reached = execute_subgoals([&subgoal], scene, &start, ExecuteOptions::default());
            if !PoseError::between(&reached, &goal).within(0.03, 20f64.to_radians()) {
                stats.off_target += 1;
                continue;
            }
            let mask = cloud
                .points()
                .iter()
                .map(|p| subgoal.transform_point(p).z - h < MASK_DISTANCE)
                .collect();
            samples.push(TrainingSample {
                skill,
                cloud,
                subgoal,
                contact,
                mask,
                object: start,
            });
            kept += 1;
        }
        if samples.len() >= n_samples {
            break;
        }
    }
    stats.emitted = samples.len();
    TrainingData { samples, stats }
}

/// Random goal reachable by `skill` from `start`, and mesh contacts that
/// realize it.
fn transition(skill: SkillType, start: &Cuboid, scene: &Scene, rng: &mut ChaCha8Rng) -> Option<(SkillType, RigidTransform, ContactPose)> {
    let ws = &scene.workspace;
    let c = start.center();
    let h = scene.table.height;
    match skill {
        SkillType::GraspReorient => {
            let goal = sample_stable_pose_in(&start.half_extents, &ws.regions.grasp_reorient, h, rng);
            let subgoal = goal.compose(&start.pose.inverse());
            mesh_grasp(start, &subgoal, scene, rng).map(|k| (skill, subgoal, k))
        }
        SkillType::PickPlace => {
            let goal = sample_stable_pose_in(&start.half_extents, &ws.regions.pick_place, h, rng);
            let t = goal.translation() - c;
            let subgoal = RigidTransform::from_translation(Vec3::new(t.x, t.y, 0.0));
            mesh_grasp(start, &subgoal, scene, rng).map(|k| (skill, subgoal, k))
        }
        SkillType::PullLeft | SkillType::PullRight => {
            let goal = sample_stable_pose_in(&start.half_extents, &ws.regions.pull, h, rng);
            let yaw = rng.random_range(-PI..PI);
            let subgoal = planar_move(&c, goal.translation().x, goal.translation().y, yaw);
            let top = top_face(start);
            let p = face_point(&top, rng);
            let front = front_from_down(&-Vec3::z(), rng.random_range(-PI..PI));
            let palm = palm_pose(&-Vec3::z(), &front, &p);
            let arm = ws.arm_for(&p, &subgoal.transform_point(&p));
            Some((skill.with_arm(arm), subgoal, ContactPose::single(arm, palm)))
        }
        SkillType::PushLeft | SkillType::PushRight => {
            let angle = rng.random_range(-PI..PI);
            let dir = Vec3::new(angle.cos(), angle.sin(), 0.0);
            let d = rng.random_range(PUSH_DISTANCE.0..PUSH_DISTANCE.1);
            let yaw = rng.random_range(-PUSH_MAX_YAW..PUSH_MAX_YAW);
            let to = c + dir * d;
            let subgoal = planar_move(&c, to.x, to.y, yaw);
            let faces: Vec<Face> = start
                .faces()
                .into_iter()
                .filter(|f| f.normal.z.abs() < 1e-6 && (-f.normal).dot(&dir) > PUSH_CONE.cos())
                .collect();
            if faces.is_empty() {
                return None;
            }
            let face = faces[rng.random_range(0..faces.len())];
            let p = face_point_above(&face, h + CONTACT_CLEARANCE, rng)?;
            let front = front_from_down(&-face.normal, rng.random_range(-FRAC_PI_2..FRAC_PI_2));
            let palm = palm_pose(&-face.normal, &front, &p);
            let arm = ws.arm_for(&p, &subgoal.transform_point(&p));
            Some((skill.with_arm(arm), subgoal, ContactPose::single(arm, palm)))
        }
    }
}

fn top_face(cuboid: &Cuboid) -> Face {
    cuboid
        .faces()
        .into_iter()
        .max_by(|a, b| a.normal.z.total_cmp(&b.normal.z))
        .expect("six faces")
}

fn face_point(face: &Face, rng: &mut ChaCha8Rng) -> Vec3 {
    let a = rng.random_range(-FACE_MARGIN..FACE_MARGIN);
    let b = rng.random_range(-FACE_MARGIN..FACE_MARGIN);
    face.center + face.u * a + face.v * b
}

fn face_point_above(face: &Face, floor: f64, rng: &mut ChaCha8Rng) -> Option<Vec3> {
    (0..20).map(|_| face_point(face, rng)).find(|p| p.z >= floor)
}

/// Opposing palm pair on a face pair that is vertical before and after the
/// subgoal.
fn mesh_grasp(start: &Cuboid, subgoal: &RigidTransform, scene: &Scene, rng: &mut ChaCha8Rng) -> Option<ContactPose> {
    let faces = start.faces();
    let vertical = |n: &Vec3| n.z.abs() < 1e-6;
    let axes: Vec<usize> = (0..3)
        .filter(|&a| vertical(&faces[2 * a].normal) && vertical(&subgoal.transform_vector(&faces[2 * a].normal)))
        .collect();
    if axes.is_empty() {
        return None;
    }
    let axis = axes[rng.random_range(0..axes.len())];
    let (f1, f2) = (faces[2 * axis], faces[2 * axis + 1]);
    let floor = scene.table.height + CONTACT_CLEARANCE;
    let p1 = face_point_above(&f1, floor, rng)?;
    let p2 = p1 - f1.center + f2.center;
    let n1 = f1.normal;
    let front = front_from_down(&-n1, rng.random_range(-FRAC_PI_2..FRAC_PI_2));
    let palm1 = palm_pose(&-n1, &front, &p1);
    let palm2 = palm_pose(&n1, &front, &p2);
    Some(scene.workspace.assign_bimanual(palm1, palm2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skills::Phase;

    fn stable(c: &Cuboid, h: f64) -> bool {
        (c.min_z() - h).abs() < 1e-9 && c.resting_face().1 < 1e-9
    }

    #[test]
    fn grasp_samples_are_feasible_stable_and_labeled() {
        let scene = Scene::tabletop();
        let data = generate_training_data(3, 12, SkillType::GraspReorient, &scene, 7);
        assert!(!data.samples.is_empty(), "{:?}", data.stats);
        assert!(data.samples.len() <= 12);
        assert_eq!(data.stats.emitted, data.samples.len());
        for s in &data.samples {
            assert!(s.contact.left.is_some() && s.contact.right.is_some());
            assert!(stable(&s.object, 0.0));
            assert!(stable(&s.object.transformed(&s.subgoal), 0.0));
            let path = generate_path(s.skill, &s.contact, &s.subgoal, &PathParams::default()).unwrap();
            assert!(check_motion(&path, &s.cloud, &s.subgoal, &scene.workspace, &[]).feasible());
            assert!(path.phase(Phase::Transport).count() > 0);
            for (p, &m) in s.cloud.points().iter().zip(&s.mask) {
                let z = s.subgoal.transform_point(p).z;
                assert_eq!(m, z < MASK_DISTANCE, "{z}");
            }
        }
    }

    #[test]
    fn pull_samples_have_one_palm() {
        let scene = Scene::tabletop();
        let data = generate_training_data(2, 6, SkillType::PullRight, &scene, 3);
        assert!(!data.samples.is_empty(), "{:?}", data.stats);
        for s in &data.samples {
            assert_eq!(s.contact.palms().count(), 1);
            assert!(s.skill.is_pull());
            assert!(skill_admits(s.skill, &s.subgoal));
            assert!(stable(&s.object.transformed(&s.subgoal), 0.0));
        }
    }

    #[test]
    fn push_and_pick_place_yield() {
        let scene = Scene::tabletop();
        for skill in [SkillType::PushRight, SkillType::PickPlace] {
            let data = generate_training_data(2, 4, skill, &scene, 11);
            assert!(!data.samples.is_empty(), "{skill}: {:?}", data.stats);
        }
    }

    #[test]
    fn replay_conversion_keeps_mask() {
        let scene = Scene::tabletop();
        let data = generate_training_data(1, 1, SkillType::GraspReorient, &scene, 5);
        let s = &data.samples[0];
        let rec = s.to_replay();
        assert_eq!(rec.mask_indices.len(), s.mask.iter().filter(|&&m| m).count());
        assert_eq!(rec.subgoal, s.subgoal);
    }

    #[test]
    fn deterministic() {
        let scene = Scene::tabletop();
        let a = generate_training_data(2, 3, SkillType::PullLeft, &scene, 1);
        let b = generate_training_data(2, 3, SkillType::PullLeft, &scene, 1);
        assert_eq!(a, b);
    }
}
