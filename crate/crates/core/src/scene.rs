//! Tabletop scene description shared by the samplers, the feasibility checks
//! and the simulation harness.

use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};

use crate::feasibility::WorkspaceModel;
use crate::geometry::{PointCloud, RigidTransform, Vec3};

/// Closed axis-aligned rectangle in the xy-plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn centered(cx: f64, cy: f64, width: f64, depth: f64) -> Self {
        Self {
            x_min: cx - width / 2.0,
            x_max: cx + width / 2.0,
            y_min: cy - depth / 2.0,
            y_max: cy + depth / 2.0,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x_min >= self.x_min
            && other.x_max <= self.x_max
            && other.y_min >= self.y_min
            && other.y_max <= self.y_max
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn depth(&self) -> f64 {
        self.y_max - self.y_min
    }

    /// The rectangle shrunk by `margin` on every side (may become empty).
    pub fn shrink(&self, margin: f64) -> Rect {
        Rect {
            x_min: self.x_min + margin,
            x_max: self.x_max - margin,
            y_min: self.y_min + margin,
            y_max: self.y_max - margin,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.x_min > self.x_max || self.y_min > self.y_max
    }
}

/// A horizontal rectangular support surface.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Surface {
    pub rect: Rect,
    /// z of the top face, meters.
    pub height: f64,
}

impl Surface {
    /// Regular grid of points covering the surface.
    pub fn cloud(&self, spacing: f64) -> PointCloud {
        let nx = (self.rect.width() / spacing).floor() as usize + 1;
        let ny = (self.rect.depth() / spacing).floor() as usize + 1;
        let mut pts = Vec::with_capacity(nx * ny);
        for i in 0..nx {
            for j in 0..ny {
                pts.push(Vec3::new(
                    self.rect.x_min + i as f64 * spacing,
                    self.rect.y_min + j as f64 * spacing,
                    self.height,
                ));
            }
        }
        PointCloud::new(pts).expect("surface grid has at least one point")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Camera {
    pub position: Vec3,
    pub focal_point: Vec3,
}

/// A box-shaped object. `pose` maps body coordinates to the world.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cuboid {
    pub half_extents: Vec3,
    pub pose: RigidTransform,
}

/// One face of a cuboid, in world coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Face {
    /// 0..6 as (+x, −x, +y, −y, +z, −z) in the body frame.
    pub index: usize,
    pub center: Vec3,
    pub normal: Vec3,
    /// In-plane axes scaled by the face half-sizes.
    pub u: Vec3,
    pub v: Vec3,
}

impl Face {
    pub fn area(&self) -> f64 {
        4.0 * self.u.norm() * self.v.norm()
    }
}

impl Cuboid {
    pub fn new(half_extents: Vec3, pose: RigidTransform) -> Self {
        Self { half_extents, pose }
    }

    pub fn body_face_normal(index: usize) -> Vec3 {
        let mut n = Vec3::zeros();
        n[index / 2] = if index.is_multiple_of(2) { 1.0 } else { -1.0 };
        n
    }

    pub fn faces(&self) -> [Face; 6] {
        std::array::from_fn(|index| {
            let axis = index / 2;
            let n_body = Self::body_face_normal(index);
            let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
            let mut u = Vec3::zeros();
            u[a] = self.half_extents[a];
            let mut v = Vec3::zeros();
            v[b] = self.half_extents[b];
            Face {
                index,
                center: self.pose.transform_point(&(n_body * self.half_extents[axis])),
                normal: self.pose.transform_vector(&n_body),
                u: self.pose.transform_vector(&u),
                v: self.pose.transform_vector(&v),
            }
        })
    }

    pub fn corners(&self) -> [Vec3; 8] {
        std::array::from_fn(|k| {
            let h = self.half_extents;
            let body = Vec3::new(
                if k & 1 == 0 { -h.x } else { h.x },
                if k & 2 == 0 { -h.y } else { h.y },
                if k & 4 == 0 { -h.z } else { h.z },
            );
            self.pose.transform_point(&body)
        })
    }

    pub fn min_z(&self) -> f64 {
        self.corners().iter().map(|c| c.z).fold(f64::INFINITY, f64::min)
    }

    pub fn center(&self) -> Vec3 {
        *self.pose.translation()
    }

    /// Radius of the bounding sphere.
    pub fn radius(&self) -> f64 {
        self.half_extents.norm()
    }

    /// Index of the face whose outward normal points most nearly along −z,
    /// together with the angle between that normal and −z.
    pub fn resting_face(&self) -> (usize, f64) {
        let faces = self.faces();
        let (idx, face) = faces
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.normal.z.total_cmp(&b.1.normal.z))
            .expect("six faces");
        let n = face.normal;
        (idx, n.x.hypot(n.y).atan2(-n.z))
    }

    pub fn transformed(&self, t: &RigidTransform) -> Cuboid {
        Cuboid {
            half_extents: self.half_extents,
            pose: t.compose(&self.pose),
        }
    }

    /// Whether a world point lies inside the box (inclusive, with slack).
    pub fn contains(&self, p: &Vec3, slack: f64) -> bool {
        let local = self.pose.inverse().transform_point(p);
        (0..3).all(|a| local[a].abs() <= self.half_extents[a] + slack)
    }
}

/// Rotation that makes body face `face` point along world −z.
pub fn face_down_rotation(face: usize) -> UnitQuaternion<f64> {
    use std::f64::consts::{FRAC_PI_2, PI};
    match face {
        0 => UnitQuaternion::from_axis_angle(&Vec3::y_axis(), FRAC_PI_2),
        1 => UnitQuaternion::from_axis_angle(&Vec3::y_axis(), -FRAC_PI_2),
        2 => UnitQuaternion::from_axis_angle(&Vec3::x_axis(), -FRAC_PI_2),
        3 => UnitQuaternion::from_axis_angle(&Vec3::x_axis(), FRAC_PI_2),
        4 => UnitQuaternion::from_axis_angle(&Vec3::x_axis(), PI),
        5 => UnitQuaternion::identity(),
        _ => panic!("cuboid face index {face} out of range"),
    }
}

/// Missing fields deserialize from [`Scene::tabletop`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scene {
    pub table: Surface,
    #[serde(default)]
    pub shelf: Option<Surface>,
    pub cameras: Vec<Camera>,
    pub workspace: WorkspaceModel,
    #[serde(default)]
    pub objects: Vec<Cuboid>,
    /// Grid spacing of the synthesized support-surface clouds, meters.
    #[serde(default = "default_support_spacing")]
    pub support_spacing: f64,
}

fn default_support_spacing() -> f64 {
    0.01
}

impl Default for Scene {
    fn default() -> Self {
        Self::tabletop()
    }
}

impl Scene {
    /// A 0.9 m × 0.7 m table at z = 0 with four corner cameras looking at
    /// the table centre.
    pub fn tabletop() -> Self {
        let rect = Rect::centered(0.0, 0.0, 0.9, 0.7);
        let table = Surface { rect, height: 0.0 };
        let focal = Vec3::new(0.0, 0.0, 0.0);
        let cameras = [
            (rect.x_min, rect.y_min),
            (rect.x_max, rect.y_min),
            (rect.x_min, rect.y_max),
            (rect.x_max, rect.y_max),
        ]
        .into_iter()
        .map(|(x, y)| Camera {
            position: Vec3::new(x, y, 0.5),
            focal_point: focal,
        })
        .collect();
        Self {
            table,
            shelf: None,
            cameras,
            workspace: WorkspaceModel::for_table(&table),
            objects: Vec::new(),
            support_spacing: default_support_spacing(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.cameras.is_empty() {
            return Err("scene needs at least one camera".into());
        }
        if !(self.table.rect.width() > 0.0 && self.table.rect.depth() > 0.0) {
            return Err("table extents must be positive".into());
        }
        if !(self.support_spacing > 0.0) {
            return Err("support_spacing must be positive".into());
        }
        self.workspace.validate()
    }

    pub fn camera_positions(&self) -> Vec<Vec3> {
        self.cameras.iter().map(|c| c.position).collect()
    }

    pub fn table_cloud(&self) -> PointCloud {
        self.table.cloud(self.support_spacing)
    }

    pub fn shelf_cloud(&self) -> Option<PointCloud> {
        self.shelf.map(|s| s.cloud(self.support_spacing))
    }
}
