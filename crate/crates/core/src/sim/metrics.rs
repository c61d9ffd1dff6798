use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};

use crate::geometry::RigidTransform;

/// Geodesic orientation loss `1 − ⟨a, b⟩²` and the rotation angle between
/// the two orientations.
pub fn orientation_error(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> (f64, f64) {
    let dot = a.coords.dot(&b.coords);
    let loss = (1.0 - dot * dot).clamp(0.0, 1.0);
    let angle = 2.0 * dot.abs().min(1.0).acos();
    (loss, angle)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseError {
    /// Meters.
    pub position: f64,
    pub orientation_loss: f64,
    /// Radians.
    pub orientation_angle: f64,
}

impl PoseError {
    pub fn between(actual: &RigidTransform, desired: &RigidTransform) -> Self {
        let (loss, angle) = orientation_error(actual.rotation(), desired.rotation());
        Self {
            position: (actual.translation() - desired.translation()).norm(),
            orientation_loss: loss,
            orientation_angle: angle,
        }
    }

    pub fn within(&self, position_tol: f64, angle_tol: f64) -> bool {
        self.position <= position_tol && self.orientation_angle <= angle_tol
    }
}
