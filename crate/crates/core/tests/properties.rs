use approx::assert_relative_eq;
use nalgebra::{Unit, UnitQuaternion};
use proptest::prelude::*;
use skillplan::analysis::{kabsch, knn, KdTree};
use skillplan::ply::{read_ply, write_ply};
use skillplan::{PointCloud, RigidTransform, Vec3};

fn vec3(scale: f64) -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-scale..scale).prop_map(Vec3::from)
}

fn rotation() -> impl Strategy<Value = UnitQuaternion<f64>> {
    (vec3(1.0), -3.1..3.1f64).prop_filter_map("nonzero axis", |(axis, angle)| {
        (axis.norm() > 1e-3).then(|| UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), angle))
    })
}

fn transform() -> impl Strategy<Value = RigidTransform> {
    (rotation(), vec3(0.5)).prop_map(|(q, t)| RigidTransform::new(q, t))
}

fn cloud(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Vec3>> {
    prop::collection::vec(vec3(0.2), n)
}

proptest! {
    #[test]
    fn compose_is_associative(a in transform(), b in transform(), c in transform(), p in vec3(1.0)) {
        let left = a.compose(&b).compose(&c).transform_point(&p);
        let right = a.compose(&b.compose(&c)).transform_point(&p);
        assert_relative_eq!(left, right, epsilon = 1e-12);
    }

    #[test]
    fn inverse_undoes(t in transform(), p in vec3(1.0)) {
        assert_relative_eq!(t.inverse().transform_point(&t.transform_point(&p)), p, epsilon = 1e-12);
        assert!(t.compose(&t.inverse()).approx_eq(&RigidTransform::identity(), 1e-12, 1e-9));
    }

    #[test]
    fn array_round_trip(t in transform()) {
        let back = RigidTransform::from_array(t.to_array()).unwrap();
        assert!(back.approx_eq(&t, 1e-15, 1e-12));
    }

    #[test]
    fn screw_halves_compose(t in transform()) {
        let half = t.interpolate_screw(0.5);
        assert!(half.compose(&half).approx_eq(&t, 1e-9, 1e-9));
        assert_eq!(t.interpolate_screw(0.0), RigidTransform::identity());
        assert_eq!(t.interpolate_screw(1.0), t);
    }

    #[test]
    fn vectors_ignore_translation(t in transform(), v in vec3(1.0)) {
        let expected = t.transform_point(&v) - t.transform_point(&Vec3::zeros());
        assert_relative_eq!(t.transform_vector(&v), expected, epsilon = 1e-12);
        assert_relative_eq!(t.transform_vector(&v).norm(), v.norm(), epsilon = 1e-12);
    }

    #[test]
    fn kdtree_matches_brute_force(pts in cloud(1..200), q in vec3(0.3), k in 1usize..20) {
        let tree = KdTree::build(&pts);
        let k = k.min(pts.len());
        let mut brute: Vec<(usize, f64)> = pts.iter().enumerate().map(|(i, p)| (i, (p - q).norm_squared())).collect();
        brute.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        brute.truncate(k);
        prop_assert_eq!(tree.nearest_k(&q, k), brute.clone());
        let cloud = PointCloud::new(pts.clone()).unwrap();
        prop_assert_eq!(knn(&cloud, &q, k).unwrap(), brute.iter().map(|b| b.0).collect::<Vec<_>>());
    }

    #[test]
    fn radius_search_matches_brute_force(pts in cloud(1..200), q in vec3(0.3), r in 0.0..0.2f64) {
        let tree = KdTree::build(&pts);
        let mut got = tree.within_radius(&q, r);
        got.sort_unstable();
        let want: Vec<usize> = (0..pts.len()).filter(|&i| (pts[i] - q).norm() <= r).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn kabsch_recovers_transform(pts in cloud(4..60), t in transform()) {
        let spread = pts.iter().map(|p| (p - pts[0]).norm()).fold(0.0, f64::max);
        prop_assume!(spread > 0.05);
        let centroid = pts.iter().sum::<Vec3>() / pts.len() as f64;
        let cov = pts.iter().fold(nalgebra::Matrix3::zeros(), |acc, p| acc + (p - centroid) * (p - centroid).transpose());
        let sv = cov.singular_values();
        prop_assume!(sv.iter().filter(|s| **s > 1e-6).count() >= 2);
        let moved: Vec<Vec3> = pts.iter().map(|p| t.transform_point(p)).collect();
        let est = kabsch(&pts, &moved);
        for (p, m) in pts.iter().zip(&moved) {
            assert_relative_eq!(est.transform_point(p), *m, epsilon = 1e-8);
        }
    }

    #[test]
    fn ply_round_trip(pts in cloud(1..100)) {
        let cloud = PointCloud::new(pts).unwrap();
        let mut buf = Vec::new();
        write_ply(&cloud, &mut buf).unwrap();
        let back = read_ply(buf.as_slice()).unwrap();
        prop_assert_eq!(back.points(), cloud.points());
    }
}

#[test]
fn knn_rejects_bad_k() {
    let cloud = PointCloud::new(vec![Vec3::zeros(), Vec3::x()]).unwrap();
    assert!(knn(&cloud, &Vec3::zeros(), 0).is_err());
    assert!(knn(&cloud, &Vec3::zeros(), 3).is_err());
}

#[test]
fn knn_breaks_ties_by_index() {
    let pts = vec![Vec3::x(), -Vec3::x(), Vec3::y(), Vec3::zeros()];
    let cloud = PointCloud::new(pts).unwrap();
    assert_eq!(knn(&cloud, &Vec3::zeros(), 4).unwrap(), vec![3, 0, 1, 2]);
}
