//! Small shared linear-algebra helpers.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

/// Closed-form least-squares rigid alignment (no scale).
///
/// Finds `(R, t)` minimizing `sum ||R * src_i + t - dst_i||^2`. Also reports
/// whether the point sets are degenerate (collinear or coincident), in which
/// case the minimizer is still returned but is not unique.
pub(crate) fn rigid_align(
    src: &[Vector3<f64>],
    dst: &[Vector3<f64>],
) -> (UnitQuaternion<f64>, Vector3<f64>, bool) {
    assert_eq!(src.len(), dst.len());
    let n = src.len() as f64;
    let src_mean: Vector3<f64> = src.iter().sum::<Vector3<f64>>() / n;
    let dst_mean: Vector3<f64> = dst.iter().sum::<Vector3<f64>>() / n;

    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s - src_mean) * (d - dst_mean).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let v = v_t.transpose();
    let det = (v * u.transpose()).determinant();
    let mut d = Matrix3::identity();
    d[(2, 2)] = if det < 0.0 { -1.0 } else { 1.0 };
    let r = v * d * u.transpose();
    let rotation = UnitQuaternion::from_matrix(&r);
    let t = dst_mean - rotation * src_mean;

    let sv = svd.singular_values;
    let degenerate = sv[1] <= 1e-12 * sv[0].max(1e-300);
    (rotation, t, degenerate)
}
