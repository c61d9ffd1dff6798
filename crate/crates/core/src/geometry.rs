//! Rigid transforms, point clouds and the preprocessing applied to clouds
//! before they are handed to a sampler.

use std::fmt;

use nalgebra::{Matrix3, Matrix4, Point3, Unit, UnitQuaternion, Vector3};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("{what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("normal {index} is not unit length (|n| = {norm})")]
    NonUnitNormal { index: usize, norm: f64 },
    #[error("quaternion has zero norm")]
    DegenerateQuaternion,
}

/// An element of SE(3): unit quaternion rotation plus translation in meters.
///
/// The quaternion is kept in the `w >= 0` hemisphere so that two transforms
/// describing the same motion compare equal component-wise.
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 7]", try_from = "[f64; 7]")]
pub struct RigidTransform {
    rotation: UnitQuaternion<f64>,
    translation: Vec3,
}

impl fmt::Debug for RigidTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = self.rotation.quaternion();
        let t = self.translation;
        write!(
            f,
            "RigidTransform(t=[{:.6}, {:.6}, {:.6}], q=[{:.6}, {:.6}, {:.6}, {:.6}])",
            t.x, t.y, t.z, q.w, q.i, q.j, q.k
        )
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

fn canonical(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    // renormalize and fold onto w >= 0
    let mut raw = *q.quaternion();
    if raw.w < 0.0 {
        raw = -raw;
    }
    UnitQuaternion::from_quaternion(raw)
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vec3) -> Self {
        Self {
            rotation: canonical(rotation),
            translation,
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self::new(UnitQuaternion::identity(), translation)
    }

    pub fn from_rotation(rotation: UnitQuaternion<f64>) -> Self {
        Self::new(rotation, Vec3::zeros())
    }

    /// Rotation by `angle` about `axis` through the point `pivot`.
    pub fn rotation_about(axis: &Vec3, angle: f64, pivot: &Vec3) -> Self {
        let rotation = UnitQuaternion::from_axis_angle(&Unit::new_normalize(*axis), angle);
        let translation = pivot - rotation * pivot;
        Self::new(rotation, translation)
    }

    /// Builds a transform from `(w, x, y, z)` quaternion components; the
    /// quaternion is normalized.
    pub fn from_parts(translation: [f64; 3], quaternion_wxyz: [f64; 4]) -> Result<Self, GeometryError> {
        let [w, x, y, z] = quaternion_wxyz;
        let q = nalgebra::Quaternion::new(w, x, y, z);
        let norm = q.norm();
        if !(norm > 1e-12) || !norm.is_finite() {
            return Err(GeometryError::DegenerateQuaternion);
        }
        Ok(Self::new(
            UnitQuaternion::from_quaternion(q),
            Vec3::from(translation),
        ))
    }

    /// `[tx, ty, tz, qw, qx, qy, qz]`, the layout used by every file format in
    /// this crate.
    pub fn to_array(&self) -> [f64; 7] {
        let t = self.translation;
        let q = self.rotation.quaternion();
        [t.x, t.y, t.z, q.w, q.i, q.j, q.k]
    }

    pub fn from_array(v: [f64; 7]) -> Result<Self, GeometryError> {
        Self::from_parts([v[0], v[1], v[2]], [v[3], v[4], v[5], v[6]])
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&self.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform::new(
            self.rotation * other.rotation,
            self.translation + self.rotation * other.translation,
        )
    }

    pub fn inverse(&self) -> RigidTransform {
        let inv = self.rotation.inverse();
        RigidTransform::new(inv, -(inv * self.translation))
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// Rotation angle of this transform, in `[0, π]`.
    pub fn angle(&self) -> f64 {
        self.rotation.angle()
    }

    /// Rotation distance `2·acos(|⟨q1,q2⟩|)`, clamped to `[0, π]`.
    pub fn rotation_distance(&self, other: &RigidTransform) -> f64 {
        quaternion_angle(&self.rotation, &other.rotation)
    }

    pub fn translation_distance(&self, other: &RigidTransform) -> f64 {
        (self.translation - other.translation).norm()
    }

    /// True when both the translation gap and the rotation gap are within the
    /// given bounds (inclusive).
    pub fn approx_eq(&self, other: &RigidTransform, position_tol: f64, angle_tol: f64) -> bool {
        self.translation_distance(other) <= position_tol && self.rotation_distance(other) <= angle_tol
    }

    /// Z-Y-X Euler yaw of the rotation. At gimbal lock the roll is taken as
    /// zero.
    pub fn yaw(&self) -> f64 {
        let r = self.rotation_matrix();
        let (r00, r10) = (r[(0, 0)], r[(1, 0)]);
        if r00.hypot(r10) < 1e-9 {
            (-r[(0, 1)]).atan2(r[(1, 1)])
        } else {
            r10.atan2(r00)
        }
    }

    /// Angle between the rotated world z-axis and the world z-axis.
    pub fn tilt(&self) -> f64 {
        let z = self.rotation * Vec3::z();
        z.z.clamp(-1.0, 1.0).acos()
    }

    /// Reduces the transform to planar motion: yaw about world z and an
    /// (x, y) translation.
    pub fn project_se2(&self) -> RigidTransform {
        let yaw = self.yaw();
        RigidTransform::new(
            UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw),
            Vec3::new(self.translation.x, self.translation.y, 0.0),
        )
    }

    /// Screw-motion logarithm: `(rotation vector, translational twist)`.
    pub fn log(&self) -> (Vec3, Vec3) {
        let omega = self.rotation.scaled_axis();
        let theta = omega.norm();
        let w = skew(&omega);
        let v_inv = if theta < 1e-8 {
            Matrix3::identity() - 0.5 * w + (1.0 / 12.0) * w * w
        } else {
            let half = 0.5 * theta;
            let coef = (1.0 - half * half.cos() / half.sin()) / (theta * theta);
            Matrix3::identity() - 0.5 * w + coef * w * w
        };
        (omega, v_inv * self.translation)
    }

    pub fn exp(omega: &Vec3, rho: &Vec3) -> RigidTransform {
        let theta = omega.norm();
        let w = skew(omega);
        let v = if theta < 1e-8 {
            Matrix3::identity() + 0.5 * w + (1.0 / 6.0) * w * w
        } else {
            let t2 = theta * theta;
            Matrix3::identity()
                + ((1.0 - theta.cos()) / t2) * w
                + ((theta - theta.sin()) / (t2 * theta)) * w * w
        };
        RigidTransform::new(UnitQuaternion::from_scaled_axis(*omega), v * rho)
    }

    /// Screw interpolation between the identity (`fraction = 0`) and `self`
    /// (`fraction = 1`).
    pub fn interpolate_screw(&self, fraction: f64) -> RigidTransform {
        if fraction <= 0.0 {
            return RigidTransform::identity();
        }
        if fraction >= 1.0 {
            return *self;
        }
        let (omega, rho) = self.log();
        RigidTransform::exp(&(omega * fraction), &(rho * fraction))
    }
}

impl From<RigidTransform> for [f64; 7] {
    fn from(t: RigidTransform) -> Self {
        t.to_array()
    }
}

impl TryFrom<[f64; 7]> for RigidTransform {
    type Error = GeometryError;

    fn try_from(v: [f64; 7]) -> Result<Self, Self::Error> {
        RigidTransform::from_array(v)
    }
}

fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn quaternion_angle(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    // Same angle as 2·acos(|⟨a,b⟩|), without the loss of precision near 0.
    let rel = a.quaternion().conjugate() * b.quaternion();
    (2.0 * rel.imag().norm().atan2(rel.w.abs())).clamp(0.0, std::f64::consts::PI)
}

/// Minimal rotation taking unit vector `from` onto unit vector `to`. For
/// opposite vectors the rotation is by π about `fallback_axis` (projected to
/// be orthogonal to `from`).
pub fn rotation_between(from: &Vec3, to: &Vec3, fallback_axis: &Vec3) -> UnitQuaternion<f64> {
    match UnitQuaternion::rotation_between(from, to) {
        Some(q) => q,
        None => {
            let mut axis = fallback_axis - from * from.dot(fallback_axis);
            if axis.norm() < 1e-9 {
                axis = from.cross(&Vec3::x());
                if axis.norm() < 1e-9 {
                    axis = from.cross(&Vec3::y());
                }
            }
            UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), std::f64::consts::PI)
        }
    }
}

/// An ordered set of 3D points with optional unit normals and a per-point
/// boolean mask.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Vec3>,
    normals: Option<Vec<Vec3>>,
    mask: Option<Vec<bool>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::EmptyCloud);
        }
        Ok(Self {
            points,
            normals: None,
            mask: None,
        })
    }

    pub fn from_points<I: IntoIterator<Item = [f64; 3]>>(points: I) -> Result<Self, GeometryError> {
        Self::new(points.into_iter().map(Vec3::from).collect())
    }

    pub fn with_normals(mut self, normals: Vec<Vec3>) -> Result<Self, GeometryError> {
        if normals.len() != self.points.len() {
            return Err(GeometryError::LengthMismatch {
                what: "normals",
                got: normals.len(),
                expected: self.points.len(),
            });
        }
        for (index, n) in normals.iter().enumerate() {
            let norm = n.norm();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(GeometryError::NonUnitNormal { index, norm });
            }
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self, GeometryError> {
        if mask.len() != self.points.len() {
            return Err(GeometryError::LengthMismatch {
                what: "mask",
                got: mask.len(),
                expected: self.points.len(),
            });
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn without_mask(mut self) -> Self {
        self.mask = None;
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vec3]> {
        self.normals.as_deref()
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn point(&self, i: usize) -> &Vec3 {
        &self.points[i]
    }

    pub fn centroid(&self) -> Vec3 {
        let sum: Vec3 = self.points.iter().sum();
        sum / self.points.len() as f64
    }

    pub fn min_z(&self) -> f64 {
        self.points.iter().map(|p| p.z).fold(f64::INFINITY, f64::min)
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for p in &self.points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }

    /// Sub-cloud made of the given indices, in order. Normals and mask are
    /// carried along.
    pub fn select(&self, indices: &[usize]) -> Result<PointCloud, GeometryError> {
        let points = indices.iter().map(|&i| self.points[i]).collect();
        let mut out = PointCloud::new(points)?;
        if let Some(n) = &self.normals {
            out.normals = Some(indices.iter().map(|&i| n[i]).collect());
        }
        if let Some(m) = &self.mask {
            out.mask = Some(indices.iter().map(|&i| m[i]).collect());
        }
        Ok(out)
    }

    /// Indices of points whose mask bit is set. Empty when there is no mask.
    pub fn masked_indices(&self) -> Vec<usize> {
        match &self.mask {
            Some(m) => m
                .iter()
                .enumerate()
                .filter_map(|(i, &b)| b.then_some(i))
                .collect(),
            None => Vec::new(),
        }
    }

    /// Rotates and translates every point; normals are only rotated and the
    /// mask is kept as is.
    pub fn transformed(&self, t: &RigidTransform) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| t.transform_point(p)).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| t.transform_vector(n)).collect()),
            mask: self.mask.clone(),
        }
    }

    pub fn as_point3(&self) -> impl Iterator<Item = Point3<f64>> + '_ {
        self.points.iter().map(|p| Point3::from(*p))
    }

    /// Uniform downsampling to `n` points. Without replacement when the cloud
    /// has at least `n` points, with replacement otherwise.
    pub fn downsample_uniform(&self, n: usize, seed: u64) -> PointCloud {
        assert!(n >= 1, "downsample target must be at least one point");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picks: Vec<usize> = if self.len() >= n {
            index::sample(&mut rng, self.len(), n).into_vec()
        } else {
            (0..n).map(|_| rng.random_range(0..self.len())).collect()
        };
        self.select(&picks).expect("n >= 1")
    }

    /// Subtracts the centroid from every point and appends the centroid as
    /// three extra features per row.
    pub fn center_and_augment(&self) -> CenteredCloud {
        let centroid = self.centroid();
        let rows = self
            .points
            .iter()
            .map(|p| {
                let c = p - centroid;
                [c.x, c.y, c.z, centroid.x, centroid.y, centroid.z]
            })
            .collect();
        CenteredCloud { rows, centroid }
    }

    pub(crate) fn set_normals_unchecked(&mut self, normals: Vec<Vec3>) {
        debug_assert_eq!(normals.len(), self.points.len());
        self.normals = Some(normals);
    }
}

/// `N × 6` rows of `(p − c) ⊕ c` where `c` is the cloud centroid.
#[derive(Clone, Debug, PartialEq)]
pub struct CenteredCloud {
    pub rows: Vec<[f64; 6]>,
    pub centroid: Vec3,
}

impl CenteredCloud {
    /// Adds the centroid back onto the centered coordinates.
    pub fn reconstruct(&self) -> Vec<Vec3> {
        self.rows
            .iter()
            .map(|r| Vec3::new(r[0], r[1], r[2]) + self.centroid)
            .collect()
    }
}
