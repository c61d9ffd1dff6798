use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::{PointCloud, Vec3};
use crate::scene::{Cuboid, Face, Scene};

/// Downsampled size fed to learned samplers.
pub const DOWNSAMPLED_POINTS: usize = 100;

/// A synthesized observation of one cuboid.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCloud {
    pub dense: PointCloud,
    pub downsampled: PointCloud,
    /// Face each dense point was sampled from.
    pub face: Vec<usize>,
    /// Camera that observed each dense point.
    pub camera: Vec<usize>,
}

fn sees(face: &Face, camera: &Vec3) -> bool {
    face.normal.dot(&(camera - face.center)) > 0.0
}

/// Faces whose outward normal points towards at least one camera.
pub fn visible_faces(scene: &Scene, object: &Cuboid) -> Vec<Face> {
    let cams = scene.camera_positions();
    object
        .faces()
        .into_iter()
        .filter(|f| cams.iter().any(|c| sees(f, c)))
        .collect()
}

/// Area-weighted uniform samples over the visible faces.
pub fn synthesize_cloud(scene: &Scene, object: &Cuboid, points: usize, seed: u64) -> SyntheticCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cams = scene.camera_positions();
    let faces = visible_faces(scene, object);
    assert!(!faces.is_empty(), "no face of the object is visible from any camera");
    let total: f64 = faces.iter().map(Face::area).sum();
    let n = points.max(1);
    let mut pts = Vec::with_capacity(n);
    let mut face_of = Vec::with_capacity(n);
    let mut camera = Vec::with_capacity(n);
    for _ in 0..n {
        let mut pick = rng.random_range(0.0..total);
        let mut f = &faces[faces.len() - 1];
        for face in &faces {
            if pick < face.area() {
                f = face;
                break;
            }
            pick -= face.area();
        }
        let a = rng.random_range(-1.0..1.0);
        let b = rng.random_range(-1.0..1.0);
        let p = f.center + f.u * a + f.v * b;
        let cam = (0..cams.len())
            .filter(|&c| sees(f, &cams[c]))
            .min_by(|&i, &j| (cams[i] - p).norm_squared().total_cmp(&(cams[j] - p).norm_squared()))
            .expect("visible face has a camera");
        pts.push(p);
        face_of.push(f.index);
        camera.push(cam);
    }
    let dense = PointCloud::new(pts).expect("at least one point");
    let downsampled = dense.downsample_uniform(DOWNSAMPLED_POINTS, seed ^ 0x9e37_79b9_7f4a_7c15);
    SyntheticCloud {
        dense,
        downsampled,
        face: face_of,
        camera,
    }
}

/// Perturbs every point along the ray from its nearest camera with Gaussian
/// noise of standard deviation `a + b·d²`, `d` the distance to that camera.
pub fn add_depth_noise(cloud: &PointCloud, scene: &Scene, a: f64, b: f64, seed: u64) -> PointCloud {
    let cams = scene.camera_positions();
    let nearest: Vec<usize> = cloud
        .points()
        .iter()
        .map(|p| {
            (0..cams.len())
                .min_by(|&i, &j| (cams[i] - p).norm_squared().total_cmp(&(cams[j] - p).norm_squared()))
                .expect("scene has cameras")
        })
        .collect();
    add_depth_noise_from(cloud, &cams, &nearest, a, b, seed)
}

/// As [`add_depth_noise`] with an explicit observing camera per point.
pub fn add_depth_noise_from(cloud: &PointCloud, cameras: &[Vec3], camera_of: &[usize], a: f64, b: f64, seed: u64) -> PointCloud {
    if a == 0.0 && b == 0.0 {
        return cloud.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let pts: Vec<Vec3> = cloud
        .points()
        .iter()
        .zip(camera_of)
        .map(|(p, &c)| {
            let ray = p - cameras[c];
            let d = ray.norm();
            let sigma = a + b * d * d;
            p + ray / d * (sigma * unit.sample(&mut rng))
        })
        .collect();
    let mut out = PointCloud::new(pts).expect("same size");
    if let Some(m) = cloud.mask() {
        out = out.with_mask(m.to_vec()).expect("same size");
    }
    out
}
