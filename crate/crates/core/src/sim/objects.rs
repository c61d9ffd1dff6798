use nalgebra::UnitQuaternion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{rotation_between, RigidTransform, Vec3};
use crate::planner::Plan;
use crate::scene::{face_down_rotation, Cuboid, Rect, Scene};

/// Half-extent range of generated cuboids, meters.
pub const HALF_EXTENT_RANGE: (f64, f64) = (0.03, 0.07);

/// Tilt below which the settle step snaps a resting face flat (5°).
pub const SETTLE_ANGLE: f64 = 5.0 * std::f64::consts::PI / 180.0;

pub fn random_half_extents(rng: &mut impl Rng) -> Vec3 {
    let (lo, hi) = HALF_EXTENT_RANGE;
    Vec3::new(
        rng.random_range(lo..hi),
        rng.random_range(lo..hi),
        rng.random_range(lo..hi),
    )
}

/// Pose resting on `face` at the given yaw with its centre above `(x, y)`.
pub fn stable_pose(half_extents: &Vec3, face: usize, yaw: f64, x: f64, y: f64, support_height: f64) -> RigidTransform {
    let rot = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw) * face_down_rotation(face);
    RigidTransform::new(rot, Vec3::new(x, y, support_height + half_extents[face / 2]))
}

/// Uniform face, uniform yaw, uniform centre inside `region` (shrunk by the
/// footprint radius when it fits).
pub fn sample_stable_pose_in(half_extents: &Vec3, region: &Rect, support_height: f64, rng: &mut impl Rng) -> RigidTransform {
    let face = rng.random_range(0..6);
    sample_stable_pose_on_face(half_extents, face, region, support_height, rng)
}

pub fn sample_stable_pose_on_face(
    half_extents: &Vec3,
    face: usize,
    region: &Rect,
    support_height: f64,
    rng: &mut impl Rng,
) -> RigidTransform {
    let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let axis = face / 2;
    let footprint = (0..3)
        .filter(|&a| a != axis)
        .map(|a| half_extents[a] * half_extents[a])
        .sum::<f64>()
        .sqrt();
    let inner = region.shrink(footprint);
    let r = if inner.is_empty() { *region } else { inner };
    let x = if r.x_max > r.x_min { rng.random_range(r.x_min..r.x_max) } else { r.x_min };
    let y = if r.y_max > r.y_min { rng.random_range(r.y_min..r.y_max) } else { r.y_min };
    stable_pose(half_extents, face, yaw, x, y, support_height)
}

/// Random stable pose of `cuboid` on the scene's table.
pub fn sample_stable_pose(cuboid: &Cuboid, scene: &Scene, seed: u64) -> RigidTransform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_stable_pose_in(&cuboid.half_extents, &scene.table.rect, scene.table.height, &mut rng)
}

/// Snaps a nearly flat pose onto its resting face. Poses tilted by more than
/// `SETTLE_ANGLE` are returned unchanged.
pub fn settle(cuboid: &Cuboid, support_height: f64) -> Cuboid {
    let (face, angle) = cuboid.resting_face();
    if angle > SETTLE_ANGLE {
        return *cuboid;
    }
    let n = cuboid.faces()[face].normal;
    let fix = rotation_between(&n, &-Vec3::z(), &Vec3::x());
    let center = cuboid.center();
    let rotated = Cuboid::new(
        cuboid.half_extents,
        RigidTransform::new(fix * cuboid.pose.rotation(), center),
    );
    let dz = support_height - rotated.min_z();
    rotated.transformed(&RigidTransform::from_translation(Vec3::new(0.0, 0.0, dz)))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExecuteOptions {
    pub settle: bool,
}

/// Idealized sticking-contact execution: every subgoal moves the object
/// rigidly. Returns the final object pose.
pub fn execute_plan(plan: &Plan, scene: &Scene, object: &Cuboid, opts: ExecuteOptions) -> RigidTransform {
    execute_subgoals(plan.params.iter().map(|p| &p.subgoal), scene, object, opts)
}

pub fn execute_subgoals<'a>(
    subgoals: impl IntoIterator<Item = &'a RigidTransform>,
    scene: &Scene,
    object: &Cuboid,
    opts: ExecuteOptions,
) -> RigidTransform {
    let mut obj = *object;
    for s in subgoals {
        obj = obj.transformed(s);
    }
    if opts.settle {
        obj = settle(&obj, scene.table.height);
    }
    obj.pose
}
