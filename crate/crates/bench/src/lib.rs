//! Fixtures shared by the benchmarks.

use skillplan::scene::{Cuboid, Scene};
use skillplan::sim::{stable_pose, synthesize_cloud};
use skillplan::{PointCloud, Vec3};

/// A 8 x 6 x 5 cm box lying on its bottom face at the table centre.
pub fn box_on_table(scene: &Scene) -> Cuboid {
    let half = Vec3::new(0.04, 0.03, 0.025);
    Cuboid::new(half, stable_pose(&half, 5, 0.3, 0.0, 0.0, scene.table.height))
}

pub fn observed_box(scene: &Scene, points: usize) -> PointCloud {
    synthesize_cloud(scene, &box_on_table(scene), points, 11).dense
}
