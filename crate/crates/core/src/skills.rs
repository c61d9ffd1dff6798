//! Manipulation primitives as generators of cartesian palm paths.
//!
//! Every skill assumes sticking contact: once the palms touch the object,
//! object and palms move together, so the palm path during transport is the
//! contact pose carried along the screw motion of the subgoal.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{PointCloud, RigidTransform, Vec3};

/// Largest z-translation a planar skill may ask for, meters.
pub const PLANAR_Z_TOLERANCE: f64 = 0.001;
/// Largest roll/pitch a planar skill may ask for, radians (1°).
pub const PLANAR_TILT_TOLERANCE: f64 = 1.0 * std::f64::consts::PI / 180.0;
/// Bimanual palms must face each other to within this angle (15°).
pub const ANTIPARALLEL_TOLERANCE: f64 = 15.0 * std::f64::consts::PI / 180.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillType {
    PullLeft,
    PullRight,
    PushLeft,
    PushRight,
    GraspReorient,
    PickPlace,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Left,
    Right,
}

impl SkillType {
    pub const ALL: [SkillType; 6] = [
        SkillType::PullLeft,
        SkillType::PullRight,
        SkillType::PushLeft,
        SkillType::PushRight,
        SkillType::GraspReorient,
        SkillType::PickPlace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SkillType::PullLeft => "pull_left",
            SkillType::PullRight => "pull_right",
            SkillType::PushLeft => "push_left",
            SkillType::PushRight => "push_right",
            SkillType::GraspReorient => "grasp_reorient",
            SkillType::PickPlace => "pick_place",
        }
    }

    /// Skeleton letter: `p` pull, `s` push, `g` grasp-reorient, `k`
    /// pick-and-place.
    pub fn letter(self) -> char {
        match self {
            SkillType::PullLeft | SkillType::PullRight => 'p',
            SkillType::PushLeft | SkillType::PushRight => 's',
            SkillType::GraspReorient => 'g',
            SkillType::PickPlace => 'k',
        }
    }

    /// Skill for a skeleton letter. Single-arm skills come back as their
    /// right-arm variant; samplers are free to switch arms within a family.
    pub fn from_letter(c: char) -> Option<SkillType> {
        match c {
            'p' => Some(SkillType::PullRight),
            's' => Some(SkillType::PushRight),
            'g' => Some(SkillType::GraspReorient),
            'k' => Some(SkillType::PickPlace),
            _ => None,
        }
    }

    pub fn is_bimanual(self) -> bool {
        matches!(self, SkillType::GraspReorient | SkillType::PickPlace)
    }

    pub fn is_planar(self) -> bool {
        !self.is_bimanual()
    }

    pub fn is_pull(self) -> bool {
        matches!(self, SkillType::PullLeft | SkillType::PullRight)
    }

    pub fn is_push(self) -> bool {
        matches!(self, SkillType::PushLeft | SkillType::PushRight)
    }

    pub fn arm(self) -> Option<Arm> {
        match self {
            SkillType::PullLeft | SkillType::PushLeft => Some(Arm::Left),
            SkillType::PullRight | SkillType::PushRight => Some(Arm::Right),
            _ => None,
        }
    }

    /// Same primitive, possibly executed with the other arm.
    pub fn same_family(self, other: SkillType) -> bool {
        self.letter() == other.letter()
    }

    /// Single-arm variant of this skill's family using `arm`.
    pub fn with_arm(self, arm: Arm) -> SkillType {
        match (self.letter(), arm) {
            ('p', Arm::Left) => SkillType::PullLeft,
            ('p', Arm::Right) => SkillType::PullRight,
            ('s', Arm::Left) => SkillType::PushLeft,
            ('s', Arm::Right) => SkillType::PushRight,
            _ => self,
        }
    }
}

impl fmt::Display for SkillType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SkillType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SkillType::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown skill '{s}'"))
    }
}

/// World-frame palm poses at the moment contact is made. The palm frame's
/// +z axis is the palm normal (the direction the palm face points) and its
/// +x axis is the palm front.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactPose {
    pub left: Option<RigidTransform>,
    pub right: Option<RigidTransform>,
}

impl ContactPose {
    pub fn single(arm: Arm, pose: RigidTransform) -> Self {
        match arm {
            Arm::Left => Self {
                left: Some(pose),
                right: None,
            },
            Arm::Right => Self {
                left: None,
                right: Some(pose),
            },
        }
    }

    pub fn bimanual(left: RigidTransform, right: RigidTransform) -> Self {
        Self {
            left: Some(left),
            right: Some(right),
        }
    }

    pub fn palm(&self, arm: Arm) -> Option<&RigidTransform> {
        match arm {
            Arm::Left => self.left.as_ref(),
            Arm::Right => self.right.as_ref(),
        }
    }

    pub fn palm_normal(&self, arm: Arm) -> Option<Vec3> {
        self.palm(arm).map(|p| p.transform_vector(&Vec3::z()))
    }

    pub fn palm_front(&self, arm: Arm) -> Option<Vec3> {
        self.palm(arm).map(|p| p.transform_vector(&Vec3::x()))
    }

    pub fn palms(&self) -> impl Iterator<Item = (Arm, &RigidTransform)> {
        self.left
            .iter()
            .map(|p| (Arm::Left, p))
            .chain(self.right.iter().map(|p| (Arm::Right, p)))
    }

    pub fn map(&self, f: impl Fn(&RigidTransform) -> RigidTransform) -> ContactPose {
        ContactPose {
            left: self.left.as_ref().map(&f),
            right: self.right.as_ref().map(&f),
        }
    }

    /// Checks that the populated palms match what `skill` needs.
    pub fn check_arity(&self, skill: SkillType) -> Result<(), SkillError> {
        match skill.arm() {
            Some(arm) => {
                let other = match arm {
                    Arm::Left => Arm::Right,
                    Arm::Right => Arm::Left,
                };
                if self.palm(arm).is_none() || self.palm(other).is_some() {
                    return Err(SkillError::Arity(skill));
                }
            }
            None => {
                let (Some(l), Some(r)) = (self.palm_normal(Arm::Left), self.palm_normal(Arm::Right)) else {
                    return Err(SkillError::Arity(skill));
                };
                let angle = l.dot(&-r).clamp(-1.0, 1.0).acos();
                if angle > ANTIPARALLEL_TOLERANCE {
                    return Err(SkillError::PalmsNotOpposed(angle.to_degrees()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkillError {
    #[error("subgoal not planar for {0}")]
    NotPlanar(SkillType),
    #[error("arity: {0} needs a different set of palms")]
    Arity(SkillType),
    #[error("bimanual palms are {0:.1}° away from facing each other")]
    PalmsNotOpposed(f64),
}

/// Palm pose whose face points along `normal` with its front as close to
/// `front` as the normal allows.
pub fn palm_pose(normal: &Vec3, front: &Vec3, position: &Vec3) -> RigidTransform {
    let z = normal.normalize();
    let mut x = front - z * front.dot(&z);
    if x.norm() < 1e-9 {
        x = z.cross(&Vec3::x());
        if x.norm() < 1e-9 {
            x = z.cross(&Vec3::y());
        }
    }
    let x = x.normalize();
    let m = Matrix3::from_columns(&[x, z.cross(&x), z]);
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m));
    RigidTransform::new(q, *position)
}

/// Palm front at in-plane angle `theta` from the most downward direction
/// in the palm plane; `|theta| < π/2` keeps the front pointing down. Falls
/// back to world x for a horizontal palm.
pub fn front_from_down(palm_normal: &Vec3, theta: f64) -> Vec3 {
    let z = palm_normal.normalize();
    let down = -Vec3::z();
    let mut e1 = down - z * down.dot(&z);
    if e1.norm() < 1e-9 {
        e1 = Vec3::x() - z * z.x;
    }
    let e1 = e1.normalize();
    let e2 = z.cross(&e1);
    e1 * theta.cos() + e2 * theta.sin()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Approach,
    Contact,
    Transport,
    Release,
    Retract,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Waypoint {
    pub left: Option<RigidTransform>,
    pub right: Option<RigidTransform>,
    pub phase: Phase,
    /// Fraction of the subgoal screw motion applied to the object at this
    /// waypoint: 0 before transport, 1 after.
    pub fraction: f64,
}

impl Waypoint {
    pub fn palms(&self) -> impl Iterator<Item = (Arm, &RigidTransform)> {
        self.left
            .iter()
            .map(|p| (Arm::Left, p))
            .chain(self.right.iter().map(|p| (Arm::Right, p)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PalmPath {
    pub skill: SkillType,
    pub waypoints: Vec<Waypoint>,
}

impl PalmPath {
    pub fn phase_labels(&self) -> Vec<Phase> {
        self.waypoints.iter().map(|w| w.phase).collect()
    }

    pub fn phase(&self, phase: Phase) -> impl Iterator<Item = &Waypoint> {
        self.waypoints.iter().filter(move |w| w.phase == phase)
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathParams {
    pub waypoints_per_phase: usize,
    /// Approach offset along −palm_normal, meters.
    pub approach_standoff: f64,
    /// Retract travel, meters.
    pub retract_distance: f64,
}

impl Default for PathParams {
    fn default() -> Self {
        Self {
            waypoints_per_phase: 20,
            approach_standoff: 0.03,
            retract_distance: 0.06,
        }
    }
}

/// True iff `subgoal` lies in the motion class of `skill`.
pub fn skill_admits(skill: SkillType, subgoal: &RigidTransform) -> bool {
    if skill.is_bimanual() {
        return true;
    }
    subgoal.translation().z.abs() < PLANAR_Z_TOLERANCE && subgoal.tilt() < PLANAR_TILT_TOLERANCE
}

/// Idealized outcome of a successful skill: the object cloud moved by the
/// subgoal.
pub fn execute_sticking(subgoal: &RigidTransform, object_cloud: &PointCloud) -> PointCloud {
    object_cloud.transformed(subgoal)
}

fn offset(pose: &RigidTransform, delta: Vec3) -> RigidTransform {
    RigidTransform::from_translation(delta).compose(pose)
}

/// Palm path for one skill invocation: approach, contact, transport, then
/// release/retract.
pub fn generate_path(
    skill: SkillType,
    contact: &ContactPose,
    subgoal: &RigidTransform,
    params: &PathParams,
) -> Result<PalmPath, SkillError> {
    contact.check_arity(skill)?;
    if skill.is_planar() && !subgoal.project_se2().approx_eq(subgoal, 1e-6, 1e-6) {
        return Err(SkillError::NotPlanar(skill));
    }
    let n = params.waypoints_per_phase.max(1);
    let mut waypoints = Vec::with_capacity(4 * n + 1);

    let along_normal = |arm: Arm, dist: f64| -> Option<RigidTransform> {
        let pose = contact.palm(arm)?;
        let normal = pose.transform_vector(&Vec3::z());
        Some(offset(pose, -normal * dist))
    };

    for k in 0..n {
        let remaining = params.approach_standoff * (1.0 - k as f64 / n as f64);
        waypoints.push(Waypoint {
            left: along_normal(Arm::Left, remaining),
            right: along_normal(Arm::Right, remaining),
            phase: Phase::Approach,
            fraction: 0.0,
        });
    }
    waypoints.push(Waypoint {
        left: contact.left,
        right: contact.right,
        phase: Phase::Contact,
        fraction: 0.0,
    });
    let mut last = *contact;
    for k in 1..=n {
        let f = k as f64 / n as f64;
        let motion = subgoal.interpolate_screw(f);
        last = contact.map(|p| motion.compose(p));
        waypoints.push(Waypoint {
            left: last.left,
            right: last.right,
            phase: Phase::Transport,
            fraction: f,
        });
    }

    let final_pose = last;
    if skill.is_bimanual() {
        // open the grasp, then lift clear
        for k in 1..=n {
            let d = params.approach_standoff * k as f64 / n as f64;
            let opened = final_pose.map(|p| offset(p, -p.transform_vector(&Vec3::z()) * d));
            waypoints.push(Waypoint {
                left: opened.left,
                right: opened.right,
                phase: Phase::Release,
                fraction: 1.0,
            });
        }
        let opened = final_pose.map(|p| {
            offset(p, -p.transform_vector(&Vec3::z()) * params.approach_standoff)
        });
        for k in 1..=n {
            let d = params.retract_distance * k as f64 / n as f64;
            let up = opened.map(|p| offset(p, Vec3::z() * d));
            waypoints.push(Waypoint {
                left: up.left,
                right: up.right,
                phase: Phase::Retract,
                fraction: 1.0,
            });
        }
    } else {
        for k in 1..=n {
            let d = params.retract_distance * k as f64 / n as f64;
            let back = final_pose.map(|p| offset(p, -p.transform_vector(&Vec3::z()) * d));
            waypoints.push(Waypoint {
                left: back.left,
                right: back.right,
                phase: Phase::Retract,
                fraction: 1.0,
            });
        }
    }
    Ok(PalmPath { skill, waypoints })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn palm_facing(normal: Vec3, front: Vec3, at: Vec3) -> RigidTransform {
        let z = normal.normalize();
        let x = (front - z * front.dot(&z)).normalize();
        let y = z.cross(&x);
        let m = nalgebra::Matrix3::from_columns(&[x, y, z]);
        let q = UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(m));
        RigidTransform::new(q, at)
    }

    fn top_contact() -> ContactPose {
        ContactPose::single(
            Arm::Left,
            palm_facing(-Vec3::z(), Vec3::x(), Vec3::new(0.0, 0.0, 0.05)),
        )
    }

    fn side_grasp() -> ContactPose {
        ContactPose::bimanual(
            palm_facing(Vec3::x(), -Vec3::z(), Vec3::new(-0.05, 0.0, 0.03)),
            palm_facing(-Vec3::x(), -Vec3::z(), Vec3::new(0.05, 0.0, 0.03)),
        )
    }

    #[test]
    fn identity_subgoal_keeps_palms_still() {
        let c = top_contact();
        let path = generate_path(SkillType::PullLeft, &c, &RigidTransform::identity(), &PathParams::default()).unwrap();
        for w in path.phase(Phase::Transport) {
            assert_eq!(w.left, c.left);
        }
    }

    #[test]
    fn pull_translation() {
        let c = top_contact();
        let sub = RigidTransform::from_translation(Vec3::new(0.2, 0.0, 0.0));
        let path = generate_path(SkillType::PullLeft, &c, &sub, &PathParams::default()).unwrap();
        let last = path.phase(Phase::Transport).last().unwrap();
        let expected = c.left.unwrap().translation() + Vec3::new(0.2, 0.0, 0.0);
        assert!((last.left.unwrap().translation() - expected).norm() < 1e-12);
        // approach starts 3 cm behind the palm
        let first = path.waypoints[0].left.unwrap();
        assert!((first.translation() - Vec3::new(0.0, 0.0, 0.08)).norm() < 1e-12);
    }

    #[test]
    fn grasp_final_pose_is_composition() {
        let c = side_grasp();
        let sub = RigidTransform::rotation_about(&Vec3::y(), FRAC_PI_2, &Vec3::new(0.0, 0.0, 0.03));
        let path = generate_path(SkillType::GraspReorient, &c, &sub, &PathParams::default()).unwrap();
        let last = path.phase(Phase::Transport).last().unwrap();
        assert!(last.left.unwrap().approx_eq(&sub.compose(&c.left.unwrap()), 1e-9, 1e-9));
        assert!(last.right.unwrap().approx_eq(&sub.compose(&c.right.unwrap()), 1e-9, 1e-9));
    }

    #[test]
    fn sticking_relative_motion() {
        let c = side_grasp();
        let sub = RigidTransform::new(
            UnitQuaternion::from_euler_angles(0.4, 1.0, -0.3),
            Vec3::new(0.1, 0.05, 0.0),
        );
        let path = generate_path(SkillType::GraspReorient, &c, &sub, &PathParams::default()).unwrap();
        for w in path.phase(Phase::Transport) {
            let want = sub.interpolate_screw(w.fraction);
            for (arm, pose) in w.palms() {
                let rel = pose.compose(&c.palm(arm).unwrap().inverse());
                assert!(rel.approx_eq(&want, 1e-9, 1e-9));
            }
        }
    }

    #[test]
    fn planar_skill_rejects_pitch() {
        let c = top_contact();
        let sub = RigidTransform::from_rotation(UnitQuaternion::from_axis_angle(&Vec3::y_axis(), FRAC_PI_2));
        assert_eq!(
            generate_path(SkillType::PullLeft, &c, &sub, &PathParams::default()),
            Err(SkillError::NotPlanar(SkillType::PullLeft))
        );
        assert!(!skill_admits(SkillType::PushRight, &sub));
        assert!(skill_admits(SkillType::GraspReorient, &sub));
        let yaw = RigidTransform::from_rotation(UnitQuaternion::from_axis_angle(&Vec3::z_axis(), PI / 3.0));
        assert!(skill_admits(SkillType::PullLeft, &yaw));
    }

    #[test]
    fn arity_errors() {
        let sub = RigidTransform::identity();
        assert_eq!(
            generate_path(SkillType::PullRight, &top_contact(), &sub, &PathParams::default()),
            Err(SkillError::Arity(SkillType::PullRight))
        );
        assert_eq!(
            generate_path(SkillType::GraspReorient, &top_contact(), &sub, &PathParams::default()),
            Err(SkillError::Arity(SkillType::GraspReorient))
        );
        let parallel = ContactPose::bimanual(side_grasp().left.unwrap(), side_grasp().left.unwrap());
        assert!(matches!(
            generate_path(SkillType::GraspReorient, &parallel, &sub, &PathParams::default()),
            Err(SkillError::PalmsNotOpposed(_))
        ));
    }

    #[test]
    fn letters_round_trip() {
        for k in SkillType::ALL {
            let back = SkillType::from_letter(k.letter()).unwrap();
            assert!(back.same_family(k));
            assert_eq!(k.name().parse::<SkillType>().unwrap(), k);
        }
        assert_eq!(SkillType::from_letter('x'), None);
    }
}
