use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use crate::analysis::{icp_with_index, AnalysisError, IcpParams, KdTree};
use crate::analysis::fit_plane;
use crate::geometry::{rotation_between, PointCloud, RigidTransform, Vec3};

use super::SamplerError;

/// A support-surface cloud prepared as an ICP target.
#[derive(Clone, Debug)]
pub struct RegistrationTarget {
    tree: KdTree,
    height: f64,
}

impl RegistrationTarget {
    pub fn new(target: &PointCloud) -> Self {
        Self {
            tree: KdTree::build(target.points()),
            height: target.centroid().z,
        }
    }

    /// Mean z of the target points.
    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn tree(&self) -> &KdTree {
        &self.tree
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegistrationOptions {
    /// Apply the π/2 pitch initialization.
    pub pitch: bool,
    pub icp: IcpParams,
    /// Below this ICP fitness the other body axis is tried.
    pub min_fitness: f64,
    /// After ICP, rotate the fitted mask plane exactly flat onto the support
    /// and set its mean height to the support height.
    pub level: bool,
}

impl Default for RegistrationOptions {
    fn default() -> Self {
        Self {
            pitch: true,
            icp: IcpParams::default(),
            min_fitness: 0.5,
            level: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Registration {
    pub transform: RigidTransform,
    pub fitness: f64,
    pub rmse: f64,
}

pub const MIN_MASK_POINTS: usize = 10;

/// Subgoal that puts the masked points onto `target`.
pub fn register_mask_subgoal(
    cloud: &PointCloud,
    mask: &[bool],
    target: &PointCloud,
    planar_init: &RigidTransform,
) -> Result<RigidTransform, SamplerError> {
    register_mask_with(
        cloud,
        mask,
        &RegistrationTarget::new(target),
        planar_init,
        &RegistrationOptions::default(),
    )
    .map(|r| r.transform)
}

pub fn register_mask_with(
    cloud: &PointCloud,
    mask: &[bool],
    target: &RegistrationTarget,
    planar_init: &RigidTransform,
    opts: &RegistrationOptions,
) -> Result<Registration, SamplerError> {
    if mask.len() != cloud.len() {
        return Err(SamplerError::MaskLength {
            mask: mask.len(),
            cloud: cloud.len(),
        });
    }
    let idx: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    if idx.len() < MIN_MASK_POINTS {
        return Err(SamplerError::MaskTooSmall(idx.len()));
    }
    let masked = cloud.select(&idx).expect("indices in range");
    let pts = cloud.points();
    let mask_centroid = masked.centroid();

    let pitches: Vec<RigidTransform> = if opts.pitch {
        let (mut normal, _) = fit_plane(pts, &idx).ok_or(SamplerError::DegenerateGeometry)?;
        if normal.dot(&(mask_centroid - cloud.centroid())) < 0.0 {
            normal = -normal;
        }
        let (a1, a2) = body_horizontal_axes(cloud);
        let (first, second) = if a1.dot(&normal).abs() <= a2.dot(&normal).abs() {
            (a1, a2)
        } else {
            (a2, a1)
        };
        vec![
            pitch_down(&normal, &first, &mask_centroid),
            pitch_down(&normal, &second, &mask_centroid),
        ]
    } else {
        vec![RigidTransform::identity()]
    };

    let mut best: Option<Registration> = None;
    let mut last_err = None;
    for pitch in &pitches {
        let pitched_c = pitch.transform_point(&mask_centroid);
        let drop = RigidTransform::from_translation(Vec3::new(0.0, 0.0, target.height - pitched_c.z));
        let init = if opts.pitch {
            planar_init.compose(&drop).compose(pitch)
        } else {
            *planar_init
        };
        match icp_with_index(&masked, &target.tree, &init, &opts.icp) {
            Ok(r) => {
                let reg = Registration {
                    transform: r.transform,
                    fitness: r.fitness,
                    rmse: r.rmse,
                };
                let good = reg.fitness >= opts.min_fitness;
                if best.as_ref().is_none_or(|b| reg.fitness > b.fitness) {
                    best = Some(reg);
                }
                if good {
                    break;
                }
            }
            Err(e @ AnalysisError::NoOverlap { .. }) => last_err = Some(e),
            Err(e) => return Err(SamplerError::Registration(e.to_string())),
        }
    }
    let mut best = best.ok_or_else(|| {
        SamplerError::Registration(last_err.map(|e| e.to_string()).unwrap_or_default())
    })?;
    if opts.level {
        best.transform = level(&masked, &best.transform, target.height);
    }
    Ok(best)
}

/// Composes `t` with the smallest rotation about the moved mask centroid
/// that makes the mask's fitted plane horizontal, then drops the mask's
/// mean height onto `height`.
fn level(masked: &PointCloud, t: &RigidTransform, height: f64) -> RigidTransform {
    let moved = masked.transformed(t);
    let all: Vec<usize> = (0..moved.len()).collect();
    let Some((mut n, _)) = fit_plane(moved.points(), &all) else {
        return *t;
    };
    if n.z > 0.0 {
        n = -n;
    }
    let c = moved.centroid();
    let fix = rotation_between(&n, &-Vec3::z(), &Vec3::x());
    let rot = RigidTransform::new(fix, c - fix * c);
    let lift = RigidTransform::from_translation(Vec3::new(0.0, 0.0, height - c.z));
    lift.compose(&rot).compose(t)
}

/// Rotation by π/2 about `axis` through `pivot`, repeated once more if the
/// normal is still far from −z. Identity if it already points down.
fn pitch_down(normal: &Vec3, axis: &Vec3, pivot: &Vec3) -> RigidTransform {
    if normal.dot(&-Vec3::z()) >= FRAC_PI_4.cos() {
        return RigidTransform::identity();
    }
    let mut axis = *axis;
    // a quarter turn maps the normal to axis × normal (plus its axial part)
    if axis.cross(normal).z > 0.0 {
        axis = -axis;
    }
    let once = RigidTransform::rotation_about(&axis, FRAC_PI_2, pivot);
    if once.transform_vector(normal).dot(&-Vec3::z()) >= FRAC_PI_4.cos() {
        once
    } else {
        RigidTransform::rotation_about(&axis, 2.0 * FRAC_PI_2, pivot)
    }
}

/// Horizontal axes of the minimum-area bounding rectangle of the cloud's
/// footprint.
pub fn body_horizontal_axes(cloud: &PointCloud) -> (Vec3, Vec3) {
    let pts = cloud.points();
    let area = |yaw: f64| {
        let (c, s) = (yaw.cos(), yaw.sin());
        let (mut u0, mut u1, mut v0, mut v1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in pts {
            let u = c * p.x + s * p.y;
            let v = -s * p.x + c * p.y;
            u0 = u0.min(u);
            u1 = u1.max(u);
            v0 = v0.min(v);
            v1 = v1.max(v);
        }
        (u1 - u0) * (v1 - v0)
    };
    let coarse = 1f64.to_radians();
    let mut best = (0..90)
        .map(|k| k as f64 * coarse)
        .min_by(|a, b| area(*a).total_cmp(&area(*b)))
        .unwrap_or(0.0);
    let fine = coarse / 20.0;
    best = (-20..=20)
        .map(|k| best + k as f64 * fine)
        .min_by(|a, b| area(*a).total_cmp(&area(*b)))
        .unwrap_or(best);
    (
        Vec3::new(best.cos(), best.sin(), 0.0),
        Vec3::new(-best.sin(), best.cos(), 0.0),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{face_down_rotation, Cuboid, Surface, Rect};
    use nalgebra::UnitQuaternion;

    fn face_cloud(cub: &Cuboid, per_face: usize) -> (PointCloud, Vec<usize>) {
        let mut pts = Vec::new();
        let mut face_of = Vec::new();
        let n = (per_face as f64).sqrt() as usize;
        for f in cub.faces() {
            for i in 0..n {
                for j in 0..n {
                    let a = -1.0 + 2.0 * (i as f64 + 0.5) / n as f64;
                    let b = -1.0 + 2.0 * (j as f64 + 0.5) / n as f64;
                    pts.push(f.center + f.u * a + f.v * b);
                    face_of.push(f.index);
                }
            }
        }
        (PointCloud::new(pts).unwrap(), face_of)
    }

    fn table() -> PointCloud {
        Surface {
            rect: Rect::centered(0.0, 0.0, 0.9, 0.7),
            height: 0.0,
        }
        .cloud(0.01)
    }

    fn resting(half: Vec3, face: usize, yaw: f64, xy: (f64, f64)) -> Cuboid {
        let rot = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw) * face_down_rotation(face);
        let c = Cuboid::new(half, RigidTransform::from_rotation(rot));
        let lift = -c.min_z();
        c.transformed(&RigidTransform::from_translation(Vec3::new(xy.0, xy.1, lift)))
    }

    #[test]
    fn already_registered_is_identity() {
        // bottom face sampled on the table grid itself, plus a top face
        let mut pts = Vec::new();
        for i in -5..=5 {
            for j in -4..=4 {
                pts.push(Vec3::new(i as f64 * 0.01, j as f64 * 0.01, 0.0));
            }
        }
        let n_bottom = pts.len();
        for i in -5..=5 {
            for j in -4..=4 {
                pts.push(Vec3::new(i as f64 * 0.01, j as f64 * 0.01, 0.06));
            }
        }
        let cloud = PointCloud::new(pts).unwrap();
        let mask: Vec<bool> = (0..cloud.len()).map(|i| i < n_bottom).collect();
        let opts = RegistrationOptions {
            pitch: false,
            ..Default::default()
        };
        let r = register_mask_with(
            &cloud,
            &mask,
            &RegistrationTarget::new(&table()),
            &RigidTransform::identity(),
            &opts,
        )
        .unwrap();
        assert!(r.transform.approx_eq(&RigidTransform::identity(), 1e-6, 1e-6), "{:?}", r.transform);
    }

    #[test]
    fn side_face_goes_down() {
        let cub = resting(Vec3::new(0.05, 0.04, 0.03), 5, 0.4, (0.05, -0.05));
        let (cloud, face_of) = face_cloud(&cub, 100);
        let mask: Vec<bool> = face_of.iter().map(|&f| f == 0).collect();
        let t = register_mask_subgoal(&cloud, &mask, &table(), &RigidTransform::identity()).unwrap();
        let moved = cloud.transformed(&t);
        for (p, m) in moved.points().iter().zip(&mask) {
            if *m {
                assert!(p.z.abs() < 0.005, "{p:?}");
            }
            assert!(p.z > -0.005);
        }
    }

    #[test]
    fn shelf_target() {
        let cub = resting(Vec3::new(0.04, 0.04, 0.06), 5, 0.0, (0.0, 0.0));
        let (cloud, face_of) = face_cloud(&cub, 100);
        let mask: Vec<bool> = face_of.iter().map(|&f| f == 2).collect();
        let shelf = Surface {
            rect: Rect::centered(0.0, 0.1, 0.4, 0.3),
            height: 0.3,
        }
        .cloud(0.01);
        let t = register_mask_subgoal(&cloud, &mask, &shelf, &RigidTransform::identity()).unwrap();
        for (p, m) in cloud.transformed(&t).points().iter().zip(&mask) {
            if *m {
                assert!((p.z - 0.3).abs() < 0.005);
            }
        }
    }

    #[test]
    fn small_mask_rejected() {
        let cub = resting(Vec3::new(0.05, 0.04, 0.03), 5, 0.0, (0.0, 0.0));
        let (cloud, _) = face_cloud(&cub, 100);
        let mut mask = vec![false; cloud.len()];
        mask[..5].iter_mut().for_each(|m| *m = true);
        assert_eq!(
            register_mask_subgoal(&cloud, &mask, &table(), &RigidTransform::identity()),
            Err(SamplerError::MaskTooSmall(5))
        );
    }

    #[test]
    fn far_target_fails() {
        let cub = resting(Vec3::new(0.05, 0.04, 0.03), 5, 0.0, (0.0, 0.0));
        let (cloud, face_of) = face_cloud(&cub, 100);
        let mask: Vec<bool> = face_of.iter().map(|&f| f == 1).collect();
        let init = RigidTransform::from_translation(Vec3::new(5.0, 0.0, 0.0));
        assert!(matches!(
            register_mask_subgoal(&cloud, &mask, &table(), &init),
            Err(SamplerError::Registration(_))
        ));
    }
}
