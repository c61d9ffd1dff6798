use nalgebra::{Matrix3, SymmetricEigen};

use super::{AnalysisError, KdTree};
use crate::geometry::{PointCloud, Vec3};

pub const DEFAULT_NORMAL_NEIGHBORS: usize = 16;

/// Per-point normals from the covariance of the `k` nearest neighbours,
/// oriented towards the closest view point.
///
/// Points whose neighbourhood covariance has rank below two take the normal
/// of the nearest point with a well-conditioned neighbourhood.
pub fn estimate_normals(
    cloud: &PointCloud,
    k: usize,
    view_points: &[Vec3],
) -> Result<PointCloud, AnalysisError> {
    if k < 3 {
        return Err(AnalysisError::InvalidParameter("normal estimation needs k >= 3"));
    }
    if cloud.len() < k {
        return Err(AnalysisError::InsufficientPoints {
            needed: k,
            available: cloud.len(),
        });
    }
    let tree = KdTree::build(cloud.points());
    let pts = cloud.points();

    let mut normals: Vec<Option<Vec3>> = pts
        .iter()
        .map(|p| {
            let nbrs = tree.nearest_k(p, k);
            let mean: Vec3 = nbrs.iter().map(|&(i, _)| pts[i]).sum::<Vec3>() / nbrs.len() as f64;
            let mut cov = Matrix3::zeros();
            for &(i, _) in &nbrs {
                let d = pts[i] - mean;
                cov += d * d.transpose();
            }
            let eig = SymmetricEigen::new(cov);
            let mut order = [0usize, 1, 2];
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let (mid, top) = (eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
            if top <= 0.0 || mid <= 1e-10 * top {
                return None;
            }
            let mut n: Vec3 = eig.eigenvectors.column(order[0]).into_owned().normalize();
            if let Some(view) = nearest_view(p, view_points) {
                if n.dot(&(view - p)) < 0.0 {
                    n = -n;
                }
            }
            Some(n)
        })
        .collect();

    let good: Vec<usize> = (0..pts.len()).filter(|&i| normals[i].is_some()).collect();
    if good.is_empty() {
        return Err(AnalysisError::InvalidParameter(
            "every neighbourhood is degenerate (collinear or coincident points)",
        ));
    }
    if good.len() < pts.len() {
        let good_pts: Vec<Vec3> = good.iter().map(|&i| pts[i]).collect();
        let good_tree = KdTree::build(&good_pts);
        for i in 0..pts.len() {
            if normals[i].is_none() {
                let (j, _) = good_tree.nearest(&pts[i]).expect("non-empty");
                normals[i] = normals[good[j]];
            }
        }
    }
    let mut out = cloud.clone();
    out.set_normals_unchecked(normals.into_iter().map(|n| n.expect("filled")).collect());
    Ok(out)
}

fn nearest_view(p: &Vec3, views: &[Vec3]) -> Option<Vec3> {
    views
        .iter()
        .min_by(|a, b| (*a - p).norm_squared().total_cmp(&(*b - p).norm_squared()))
        .copied()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RigidTransform;
    use nalgebra::UnitQuaternion;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn plane_normals_face_camera() {
        let mut pts = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                pts.push([i as f64 * 0.01, j as f64 * 0.01, 0.0]);
            }
        }
        let cloud = PointCloud::from_points(pts).unwrap();
        let views = [Vec3::new(0.1, 0.1, 1.0), Vec3::new(-1.0, -1.0, 0.5)];
        let out = estimate_normals(&cloud, 16, &views).unwrap();
        for n in out.normals().unwrap() {
            assert!((n - Vec3::z()).norm() < 1e-6, "{n:?}");
        }
    }

    fn sphere(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .map(|_| loop {
                let v = Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                if v.norm() > 0.1 && v.norm() <= 1.0 {
                    break v.normalize();
                }
            })
            .collect();
        PointCloud::new(pts).unwrap()
    }

    #[test]
    fn sphere_normals_radial() {
        let cloud = sphere(2000, 4);
        let views: Vec<Vec3> = [
            [3.0, 3.0, 3.0],
            [-3.0, 3.0, 3.0],
            [3.0, -3.0, 3.0],
            [-3.0, -3.0, 3.0],
            [3.0, 3.0, -3.0],
            [-3.0, 3.0, -3.0],
            [3.0, -3.0, -3.0],
            [-3.0, -3.0, -3.0],
        ]
        .iter()
        .map(|v| Vec3::from(*v))
        .collect();
        let out = estimate_normals(&cloud, 16, &views).unwrap();
        for (p, n) in cloud.points().iter().zip(out.normals().unwrap()) {
            let angle = n.dot(p).clamp(-1.0, 1.0).acos();
            assert!(angle < 5f64.to_radians(), "angle {angle}");
        }
    }

    #[test]
    fn cube_face_normals() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for face in 0..6 {
            let axis = face / 2;
            let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
            for _ in 0..1000 {
                let mut p = Vec3::new(
                    rng.random_range(-0.05..0.05),
                    rng.random_range(-0.05..0.05),
                    rng.random_range(-0.05..0.05),
                );
                p[axis] = 0.05 * sign;
                let mut n = Vec3::zeros();
                n[axis] = sign;
                pts.push(p);
                truth.push(n);
            }
        }
        let cloud = PointCloud::new(pts).unwrap();
        let views: Vec<Vec3> = (0..6)
            .map(|f| {
                let mut v = Vec3::zeros();
                v[f / 2] = if f % 2 == 0 { 1.0 } else { -1.0 };
                v
            })
            .collect();
        let out = estimate_normals(&cloud, 16, &views).unwrap();
        for ((p, n), t) in cloud.points().iter().zip(out.normals().unwrap()).zip(&truth) {
            // points within 1.5 cm of an edge are exempt (16-NN radius is ~0.7 cm here)
            let near_edge = (0..3).filter(|&a| p[a].abs() > 0.035).count() > 1;
            if !near_edge {
                assert!(n.dot(t) > 5f64.to_radians().cos(), "p {p:?} n {n:?}");
            }
        }
    }

    #[test]
    fn degenerate_neighbourhood_substituted() {
        // a plane plus a collinear spur of coincident points
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                pts.push([i as f64 * 0.01, j as f64 * 0.01, 0.0]);
            }
        }
        for _ in 0..20 {
            pts.push([5.0, 5.0, 5.0]);
        }
        let cloud = PointCloud::from_points(pts).unwrap();
        let out = estimate_normals(&cloud, 8, &[Vec3::new(0.0, 0.0, 1.0)]).unwrap();
        let ns = out.normals().unwrap();
        for n in &ns[100..] {
            assert!((n - Vec3::z()).norm() < 1e-6);
        }
    }

    #[test]
    fn rigid_invariance() {
        let cloud = sphere(400, 9);
        let views = vec![Vec3::new(2.0, 0.0, 1.0), Vec3::new(-2.0, 0.5, 0.0), Vec3::new(0.0, -2.0, -1.0)];
        let t = RigidTransform::new(
            UnitQuaternion::from_euler_angles(0.3, -0.7, 1.9),
            Vec3::new(0.5, -1.0, 2.0),
        );
        let a = estimate_normals(&cloud, 12, &views).unwrap();
        let moved_views: Vec<Vec3> = views.iter().map(|v| t.transform_point(v)).collect();
        let b = estimate_normals(&cloud.transformed(&t), 12, &moved_views).unwrap();
        for (na, nb) in a.normals().unwrap().iter().zip(b.normals().unwrap()) {
            assert!((t.transform_vector(na) - nb).norm() < 1e-6);
        }
    }
}
