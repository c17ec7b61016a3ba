use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::scan_io::{transform_cloud, Point3, Pose3};

fn random_cloud(seed: u64, n: usize) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PointCloud::new(
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-1.0..3.0),
                )
            })
            .collect(),
    )
}

/// Closed-form eigenvalues of a symmetric 3x3 matrix (trigonometric method),
/// used as an oracle independent of the solver in the implementation.
fn eig3_oracle(m: &Matrix3<f64>) -> [f64; 3] {
    let p1 = m[(0, 1)].powi(2) + m[(0, 2)].powi(2) + m[(1, 2)].powi(2);
    if p1 == 0.0 {
        let mut d = [m[(0, 0)], m[(1, 1)], m[(2, 2)]];
        d.sort_by(|a, b| b.total_cmp(a));
        return d;
    }
    let q = m.trace() / 3.0;
    let p2 = (m[(0, 0)] - q).powi(2) + (m[(1, 1)] - q).powi(2) + (m[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = (m - Matrix3::identity() * q) / p;
    let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    let mut d = [e1, e2, e3];
    d.sort_by(|a, b| b.total_cmp(a));
    d
}

#[test]
fn knn_with_k_equal_n_returns_everything() {
    let cloud = PointCloud::new(vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(2.0, 0.0, 0.0),
    ]);
    let lists = knn_indices(&cloud, 3).unwrap();
    for (i, list) in lists.iter().enumerate() {
        assert_eq!(list.len(), 3);
        let mut sorted = list.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2], "point {i}");
        assert_eq!(list[0], i, "self is nearest");
    }
}

#[test]
fn knn_rejects_too_few_points() {
    let cloud = PointCloud::new(vec![Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)]);
    assert!(matches!(
        knn_indices(&cloud, 30),
        Err(Error::TooFewPoints { have: 2, need: 30 })
    ));
}

#[test]
fn stats_of_identical_points_are_zero() {
    let cloud = PointCloud::new(vec![Point3::new(1.0, 2.0, 3.0); 10]);
    let neighbors = vec![(0..10).collect::<Vec<_>>(); 10];
    let stats = neighborhood_stats(&cloud, &neighbors);
    for s in stats {
        assert_eq!(s.lambda3d, [0.0; 3]);
        assert_eq!(s.lambda2d, [0.0; 2]);
        assert_eq!(s.z_var, 0.0);
        assert_eq!(s.z_max, 3.0);
        assert_eq!(s.z_min, 3.0);
    }
}

#[test]
fn stats_of_vertical_segment_have_1d_structure() {
    let cloud = PointCloud::new((0..8).map(|i| Point3::new(0.0, 0.0, i as f64)).collect());
    let neighbors = vec![(0..8).collect::<Vec<_>>()];
    let s = neighborhood_stats(&cloud, &neighbors)[0];
    assert!(s.lambda3d[0] > 0.0);
    assert_abs_diff_eq!(s.lambda3d[1], 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(s.lambda3d[2], 0.0, epsilon = 1e-12);
    assert_eq!(s.lambda2d, [0.0, 0.0]);
}

#[test]
fn stats_match_independent_eigen_oracle() {
    let cloud = random_cloud(3, 30);
    let idx: Vec<usize> = (0..30).collect();
    let s = neighborhood_stats(&cloud, &[idx.clone()])[0];

    // Assemble the covariance explicitly and eigensolve it analytically.
    let k = idx.len() as f64;
    let mean = cloud.points.iter().fold(Vector3::zeros(), |a, p| a + p.xyz()) / k;
    let mut cov = Matrix3::zeros();
    for p in &cloud.points {
        let d = p.xyz() - mean;
        cov += d * d.transpose();
    }
    cov /= k;
    let oracle = eig3_oracle(&cov);
    for (got, want) in s.lambda3d.iter().zip(oracle) {
        assert!(
            (got - want).abs() <= 1e-9 * want.abs().max(1.0),
            "{got} vs {want}"
        );
    }
}

#[test]
fn feature_formulas_on_pinned_eigenvalues() {
    let mk = |lambda3d: [f64; 3]| NeighborhoodStats {
        lambda3d,
        lambda2d: [0.0, 0.0],
        z_max: 0.0,
        z_min: 0.0,
        z_var: 0.0,
    };

    let iso = point_features(&mk([1.0, 1.0, 1.0]), true);
    assert_abs_diff_eq!(iso.change_of_curvature, 1.0 / 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(iso.omni_variance, 1.0 / 3.0, epsilon = 1e-12);
    assert_abs_diff_eq!(iso.eigen_entropy, 3f64.ln(), epsilon = 1e-12);

    let line = point_features(&mk([1.0, 0.0, 0.0]), true);
    assert_eq!(line.change_of_curvature, 0.0);
    assert_eq!(line.omni_variance, 0.0);
    assert_eq!(line.eigen_entropy, 0.0);

    // Scalar evaluation of the formulas for (0.5, 0.3, 0.2).
    let f = point_features(&mk([0.5, 0.3, 0.2]), true);
    assert_abs_diff_eq!(f.change_of_curvature, 0.2, epsilon = 1e-12);
    assert_abs_diff_eq!(f.omni_variance, 0.03f64.cbrt(), epsilon = 1e-12);
    assert_abs_diff_eq!(f.omni_variance, 0.310723, epsilon = 1e-6);
    let entropy = -(0.5 * 0.5f64.ln() + 0.3 * 0.3f64.ln() + 0.2 * 0.2f64.ln());
    assert_abs_diff_eq!(f.eigen_entropy, entropy, epsilon = 1e-12);
    assert_abs_diff_eq!(f.eigen_entropy, 1.029653, epsilon = 1e-6);
}

#[test]
fn zero_denominators_give_zero_features() {
    let s = NeighborhoodStats {
        lambda3d: [0.0; 3],
        lambda2d: [0.0; 2],
        z_max: 1.0,
        z_min: 1.0,
        z_var: 0.0,
    };
    let f = point_features(&s, true);
    assert_eq!(f.to_array(), [0.0; 6]);
}

#[test]
fn rasterize_single_point_and_max_pooling() {
    let cfg = GridConfig {
        size: 20,
        extent: 10.0,
        ..GridConfig::default()
    };
    let cloud = PointCloud::new(vec![Point3::new(0.2, 0.2, 0.0)]);
    let feat = PointFeature {
        max_height_diff: 2.0,
        ..PointFeature::default()
    };
    let bev = rasterize_bev(&cloud, &[feat], &cfg).unwrap();
    let nonzero: Vec<_> = bev
        .data
        .indexed_iter()
        .filter(|(_, &v)| v != 0.0)
        .collect();
    assert_eq!(nonzero.len(), 1);
    assert_eq!(nonzero[0].0, (4, 10, 10));
    assert_eq!(*nonzero[0].1, 2.0);

    // Two points in the same cell: channel max wins.
    let cloud2 = PointCloud::new(vec![Point3::new(0.2, 0.2, 0.0), Point3::new(0.3, 0.3, 0.0)]);
    let f1 = PointFeature {
        change_of_curvature: 0.1,
        ..PointFeature::default()
    };
    let f2 = PointFeature {
        change_of_curvature: 0.3,
        ..PointFeature::default()
    };
    let bev2 = rasterize_bev(&cloud2, &[f1, f2], &cfg).unwrap();
    assert_eq!(bev2.data[[0, 10, 10]], 0.3);
}

#[test]
fn rasterize_matches_naive_per_cell_oracle() {
    let cfg = GridConfig {
        size: 24,
        extent: 12.0,
        ..GridConfig::default()
    };
    let cloud = random_cloud(9, 1000);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let feats: Vec<PointFeature> = (0..1000)
        .map(|_| PointFeature {
            change_of_curvature: rng.random(),
            omni_variance: rng.random(),
            eigen_entropy: rng.random(),
            linearity_2d: rng.random(),
            max_height_diff: rng.random(),
            height_variance: rng.random(),
        })
        .collect();
    let bev = rasterize_bev(&cloud, &feats, &cfg).unwrap();

    let res = cfg.resolution();
    for c in 0..6 {
        for ix in 0..cfg.size {
            for iy in 0..cfg.size {
                let mut want = 0.0f64;
                for (p, f) in cloud.points.iter().zip(&feats) {
                    let fx = (p.x + cfg.extent) / res;
                    let fy = (p.y + cfg.extent) / res;
                    if fx >= 0.0
                        && fy >= 0.0
                        && (fx as usize) == ix
                        && (fy as usize) == iy
                    {
                        want = want.max(f.to_array()[c]);
                    }
                }
                assert_eq!(bev.data[[c, ix, iy]], want, "c={c} ix={ix} iy={iy}");
            }
        }
    }
}

#[test]
fn occupancy_counts_z_bins() {
    let cfg = GridConfig {
        size: 16,
        extent: 8.0,
        z_bins: 20,
        z_min: -2.0,
        z_max: 8.0,
    };
    // One point: exactly one occupied bin.
    let one = PointCloud::new(vec![Point3::new(0.1, 0.1, 1.0)]);
    let bev = occupancy_bev(&one, &cfg).unwrap();
    assert_eq!(bev.data[[0, 8, 8]], 1.0);
    assert_eq!(bev.data.sum(), 1.0);

    // Vertical post at bin centers of 5 distinct z bins: count 5.
    let z_res = (cfg.z_max - cfg.z_min) / cfg.z_bins as f64;
    let post = PointCloud::new(
        (0..5)
            .map(|i| Point3::new(0.1, 0.1, cfg.z_min + (i as f64 + 0.5) * z_res))
            .collect(),
    );
    let bev = occupancy_bev(&post, &cfg).unwrap();
    assert_eq!(bev.data[[0, 8, 8]], 5.0);
}

#[test]
fn occupancy_equals_constant_feature_maxpool_only_for_thin_columns() {
    let cfg = GridConfig {
        size: 16,
        extent: 8.0,
        ..GridConfig::default()
    };
    // Thin column: one occupied bin per cell -> count 1 == max-pooled 1.
    let thin = PointCloud::new(vec![Point3::new(0.1, 0.1, 1.0), Point3::new(-3.0, 2.0, 0.5)]);
    let ones = vec![
        PointFeature {
            change_of_curvature: 1.0,
            ..PointFeature::default()
        };
        thin.len()
    ];
    let occ = occupancy_bev(&thin, &cfg).unwrap();
    let pooled = rasterize_bev(&thin, &ones, &cfg).unwrap();
    for ((_, i, j), &v) in occ.data.indexed_iter() {
        assert_eq!(v, pooled.data[[0, i, j]]);
    }

    // Tall column: counts dominate the constant-1 pooling.
    let tall = PointCloud::new(vec![
        Point3::new(0.1, 0.1, 0.5),
        Point3::new(0.1, 0.1, 2.5),
        Point3::new(0.1, 0.1, 4.5),
    ]);
    let occ = occupancy_bev(&tall, &cfg).unwrap();
    assert_eq!(occ.data[[0, 8, 8]], 3.0);
}

#[test]
fn features_invariant_under_yaw_and_translation() {
    let cloud = random_cloud(21, 300);
    let feats = compute_point_features(&cloud, 30, true).unwrap();

    let yawed = transform_cloud(&cloud, &Pose3::from_xy_yaw(0.0, 0.0, 1.234));
    let feats_yaw = compute_point_features(&yawed, 30, true).unwrap();
    for (a, b) in feats.iter().zip(&feats_yaw) {
        for (x, y) in a.to_array().iter().zip(b.to_array()) {
            assert!((x - y).abs() < 1e-6, "yaw: {x} vs {y}");
        }
    }

    let moved = transform_cloud(&cloud, &Pose3::from_xy_yaw(3.7, -1.9, 0.0));
    let feats_moved = compute_point_features(&moved, 30, true).unwrap();
    for (a, b) in feats.iter().zip(&feats_moved) {
        for (x, y) in a.to_array().iter().zip(b.to_array()) {
            assert!((x - y).abs() < 1e-9, "translation: {x} vs {y}");
        }
    }
}

#[test]
fn translation_by_cell_multiples_shifts_bev_support() {
    let cfg = GridConfig {
        size: 40,
        extent: 20.0,
        ..GridConfig::default()
    };
    let res = cfg.resolution();
    let cloud = random_cloud(5, 120);
    let occ = occupancy_bev(&cloud, &cfg).unwrap();
    let moved = transform_cloud(&cloud, &Pose3::from_xy_yaw(3.0 * res, -2.0 * res, 0.0));
    let occ_moved = occupancy_bev(&moved, &cfg).unwrap();
    for ((_, ix, iy), &v) in occ.data.indexed_iter() {
        let (jx, jy) = (ix as i64 + 3, iy as i64 - 2);
        if jx >= 0 && jy >= 0 && (jx as usize) < cfg.size && (jy as usize) < cfg.size {
            assert_eq!(occ_moved.data[[0, jx as usize, jy as usize]], v);
        }
    }
}

#[test]
fn normalized_features_are_scale_invariant() {
    let cloud = random_cloud(33, 100);
    let scaled = PointCloud::new(
        cloud
            .points
            .iter()
            .map(|p| Point3::new(p.x * 2.5, p.y * 2.5, p.z * 2.5))
            .collect(),
    );
    let a = compute_point_features(&cloud, 30, true).unwrap();
    let b = compute_point_features(&scaled, 30, true).unwrap();
    for (fa, fb) in a.iter().zip(&b) {
        assert!((fa.change_of_curvature - fb.change_of_curvature).abs() < 1e-9);
        assert!((fa.omni_variance - fb.omni_variance).abs() < 1e-9);
        assert!((fa.eigen_entropy - fb.eigen_entropy).abs() < 1e-9);
        assert!((fa.linearity_2d - fb.linearity_2d).abs() < 1e-9);
        // The metric features scale by s and s^2.
        assert!((fa.max_height_diff * 2.5 - fb.max_height_diff).abs() < 1e-9);
        assert!((fa.height_variance * 6.25 - fb.height_variance).abs() < 1e-7);
    }
}
