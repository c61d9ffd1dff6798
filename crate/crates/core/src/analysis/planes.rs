use nalgebra::{Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::geometry::{PointCloud, Vec3};

/// A plane `normal · p = offset` with the cloud indices assigned to it.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    pub normal: Vec3,
    pub offset: f64,
    pub inlier_indices: Vec<usize>,
}

impl Plane {
    pub fn distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneParams {
    /// meters
    pub inlier_threshold: f64,
    pub min_inliers: usize,
    pub max_planes: usize,
}

impl Default for PlaneParams {
    fn default() -> Self {
        Self {
            inlier_threshold: 0.005,
            min_inliers: 30,
            max_planes: 6,
        }
    }
}

const ASSUMED_INLIER_FRACTION: f64 = 0.25;
const CONFIDENCE: f64 = 0.999;
const MAX_ITERATIONS: usize = 2000;

/// Hypothesis budget for 3-point RANSAC at the assumed inlier fraction.
pub fn ransac_iterations() -> usize {
    let w3 = ASSUMED_INLIER_FRACTION.powi(3);
    let n = ((1.0 - CONFIDENCE).ln() / (1.0 - w3).ln()).ceil() as usize;
    n.min(MAX_ITERATIONS)
}

/// Repeatedly extracts the largest RANSAC plane and removes its inliers.
pub fn segment_planes(
    cloud: &PointCloud,
    params: &PlaneParams,
    seed: u64,
) -> Result<Vec<Plane>, AnalysisError> {
    if !(params.inlier_threshold > 0.0) || params.min_inliers == 0 || params.max_planes == 0 {
        return Err(AnalysisError::InvalidParameter(
            "plane thresholds must be positive",
        ));
    }
    let pts = cloud.points();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining: Vec<usize> = (0..pts.len()).collect();
    let mut planes = Vec::new();
    let iterations = ransac_iterations();
    let thr = params.inlier_threshold;
    let min_inliers = params.min_inliers.max(3);

    while planes.len() < params.max_planes && remaining.len() >= min_inliers {
        let mut best: Option<(Vec3, f64, usize)> = None;
        for _ in 0..iterations {
            let a = remaining[rng.random_range(0..remaining.len())];
            let b = remaining[rng.random_range(0..remaining.len())];
            let c = remaining[rng.random_range(0..remaining.len())];
            let n = (pts[b] - pts[a]).cross(&(pts[c] - pts[a]));
            let len = n.norm();
            if len < 1e-12 {
                continue;
            }
            let n = n / len;
            let d = n.dot(&pts[a]);
            let count = remaining
                .iter()
                .filter(|&&i| (n.dot(&pts[i]) - d).abs() <= thr)
                .count();
            if best.is_none_or(|(_, _, c)| count > c) {
                best = Some((n, d, count));
            }
        }
        let Some((n, d, count)) = best else { break };
        if count < min_inliers {
            break;
        }
        let inliers: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&i| (n.dot(&pts[i]) - d).abs() <= thr)
            .collect();
        // least-squares refit; keep it only if it does not lose support
        let (mut normal, mut offset) = (n, d);
        if let Some((rn, rd)) = fit_plane(pts, &inliers) {
            let refit: Vec<usize> = remaining
                .iter()
                .copied()
                .filter(|&i| (rn.dot(&pts[i]) - rd).abs() <= thr)
                .collect();
            if refit.len() >= inliers.len() {
                normal = rn;
                offset = rd;
            }
        }
        let inlier_indices: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&i| (normal.dot(&pts[i]) - offset).abs() <= thr)
            .collect();
        if inlier_indices.len() < min_inliers {
            break;
        }
        remaining.retain(|i| inlier_indices.binary_search(i).is_err());
        planes.push(Plane {
            normal,
            offset,
            inlier_indices,
        });
    }
    Ok(planes)
}

/// Total-least-squares plane through the given points.
pub(crate) fn fit_plane(pts: &[Vec3], idx: &[usize]) -> Option<(Vec3, f64)> {
    if idx.len() < 3 {
        return None;
    }
    let mean: Vec3 = idx.iter().map(|&i| pts[i]).sum::<Vec3>() / idx.len() as f64;
    let mut cov = Matrix3::zeros();
    for &i in idx {
        let d = pts[i] - mean;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let k = eig.eigenvalues.imin();
    let n: Vec3 = eig.eigenvectors.column(k).into_owned();
    let len = n.norm();
    if len < 1e-12 {
        return None;
    }
    let n = n / len;
    Some((n, n.dot(&mean)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iteration_budget() {
        // ceil(ln(0.001) / ln(1 - 0.25^3))
        assert_eq!(ransac_iterations(), 439);
    }

    #[test]
    fn single_plane() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Vec3> = (0..300)
            .map(|_| Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), 0.2))
            .collect();
        let cloud = PointCloud::new(pts).unwrap();
        let planes = segment_planes(&cloud, &PlaneParams::default(), 1).unwrap();
        assert_eq!(planes.len(), 1);
        assert_eq!(planes[0].inlier_indices.len(), 300);
        assert!(planes[0].normal.z.abs() > 1.0 - 1e-9);
    }

    #[test]
    fn cuboid_faces() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let half = Vec3::new(0.06, 0.04, 0.03);
        let mut pts = Vec::new();
        for face in 0..6 {
            let axis = face / 2;
            let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
            for _ in 0..200 {
                let mut p = Vec3::new(
                    rng.random_range(-half.x..half.x),
                    rng.random_range(-half.y..half.y),
                    rng.random_range(-half.z..half.z),
                );
                p[axis] = half[axis] * sign;
                pts.push(p);
            }
        }
        let cloud = PointCloud::new(pts).unwrap();
        let params = PlaneParams {
            min_inliers: 60,
            ..PlaneParams::default()
        };
        let planes = segment_planes(&cloud, &params, 3).unwrap();
        assert!(!planes.is_empty() && planes.len() <= 6);
        for pl in &planes {
            let best = (0..3).map(|a| pl.normal[a].abs()).fold(0.0, f64::max);
            assert!(best > 5f64.to_radians().cos(), "{:?}", pl.normal);
            for &i in &pl.inlier_indices {
                assert!(pl.distance(&cloud.points()[i]).abs() <= params.inlier_threshold);
            }
        }
        let mut seen = std::collections::HashSet::new();
        for pl in &planes {
            for &i in &pl.inlier_indices {
                assert!(seen.insert(i), "inlier sets overlap");
            }
        }
        // deterministic under a fixed seed
        assert_eq!(segment_planes(&cloud, &params, 3).unwrap(), planes);
    }

    #[test]
    fn noise_ball_has_no_plane() {
        // Uniform ball of radius r: the best slab of half-width t holds the
        // fraction 3t/(2r) - t^3/(2r^3) of the points, far below 30%.
        let (r, t) = (0.1f64, 0.005f64);
        let slab = 1.5 * t / r - 0.5 * (t / r).powi(3);
        assert!(slab < 0.08);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pts: Vec<Vec3> = (0..500)
            .map(|_| loop {
                let v = Vec3::new(
                    rng.random_range(-r..r),
                    rng.random_range(-r..r),
                    rng.random_range(-r..r),
                );
                if v.norm() <= r {
                    break v;
                }
            })
            .collect();
        let cloud = PointCloud::new(pts).unwrap();
        let params = PlaneParams {
            inlier_threshold: t,
            min_inliers: 150,
            ..PlaneParams::default()
        };
        assert!(segment_planes(&cloud, &params, 9).unwrap().is_empty());
    }
}
