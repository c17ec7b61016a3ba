//! Point cloud and pose types, file I/O, and scan preprocessing.
//!
//! Conventions used throughout the crate:
//!
//! * Coordinates are meters in a right-handed frame, z up.
//! * A pose maps sensor-frame coordinates to world-frame coordinates:
//!   `p_world = R * p_sensor + t`.
//! * Yaw is a rotation about +z, normalized to `[0, 2*pi)`.

mod formats;
mod poses;

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use formats::{load_cloud, save_cloud, CloudFormat};
pub use poses::{load_poses, save_poses};

/// A single LiDAR return. Coordinates must be finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub intensity: Option<f64>,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 {
            x,
            y,
            z,
            intensity: None,
        }
    }

    pub fn with_intensity(x: f64, y: f64, z: f64, intensity: f64) -> Self {
        Point3 {
            x,
            y,
            z,
            intensity: Some(intensity),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.z.is_finite()
            && self.intensity.map_or(true, |i| i.is_finite())
    }

    pub fn xyz(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    /// Horizontal distance from the frame origin.
    pub fn range_2d(&self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }
}

/// An ordered collection of points in a common frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub frame_id: String,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        PointCloud {
            points,
            frame_id: String::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Planar pose: translation in meters, yaw in `[0, 2*pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Pose2 {
            x,
            y,
            yaw: wrap_angle(yaw),
        }
    }
}

/// Normalize an angle to `[0, 2*pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = a % two_pi;
    if r < 0.0 {
        r += two_pi;
    }
    if r >= two_pi {
        r = 0.0;
    }
    r
}

/// Rigid transform in 3D, stored as unit quaternion plus translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "Pose3Repr", try_from = "Pose3Repr")]
pub struct Pose3 {
    pub translation: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
}

/// Flat serialized form of [`Pose3`], matching the pose CSV column order.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Pose3Repr {
    x: f64,
    y: f64,
    z: f64,
    qx: f64,
    qy: f64,
    qz: f64,
    qw: f64,
}

impl From<Pose3> for Pose3Repr {
    fn from(p: Pose3) -> Self {
        let q = p.rotation.quaternion();
        Pose3Repr {
            x: p.translation.x,
            y: p.translation.y,
            z: p.translation.z,
            qx: q.i,
            qy: q.j,
            qz: q.k,
            qw: q.w,
        }
    }
}

impl TryFrom<Pose3Repr> for Pose3 {
    type Error = String;

    fn try_from(r: Pose3Repr) -> std::result::Result<Self, String> {
        let q = nalgebra::Quaternion::new(r.qw, r.qx, r.qy, r.qz);
        let norm = q.norm();
        if !norm.is_finite() || norm < 1e-6 {
            return Err(format!("quaternion norm {norm} is not usable"));
        }
        Ok(Pose3 {
            translation: Vector3::new(r.x, r.y, r.z),
            rotation: UnitQuaternion::from_quaternion(q),
        })
    }
}

impl Default for Pose3 {
    fn default() -> Self {
        Pose3::identity()
    }
}

impl Pose3 {
    pub fn identity() -> Self {
        Pose3 {
            translation: Vector3::zeros(),
            rotation: UnitQuaternion::identity(),
        }
    }

    pub fn new(translation: Vector3<f64>, rotation: UnitQuaternion<f64>) -> Self {
        Pose3 {
            translation,
            rotation,
        }
    }

    /// Planar pose promoted to 3D with zero z, roll and pitch.
    pub fn from_xy_yaw(x: f64, y: f64, yaw: f64) -> Self {
        Pose3 {
            translation: Vector3::new(x, y, 0.0),
            rotation: UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw),
        }
    }

    pub fn from_pose2(p: &Pose2) -> Self {
        Pose3::from_xy_yaw(p.x, p.y, p.yaw)
    }

    /// Yaw/x/y projection, discarding z, roll and pitch.
    pub fn to_pose2(&self) -> Pose2 {
        Pose2::new(self.translation.x, self.translation.y, self.yaw())
    }

    /// Heading of the rotated x axis in the horizontal plane.
    pub fn yaw(&self) -> f64 {
        let fwd = self.rotation * Vector3::x();
        wrap_angle(fwd.y.atan2(fwd.x))
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Pose3 {
        let inv_rot = self.rotation.inverse();
        Pose3 {
            translation: -(inv_rot * self.translation),
            rotation: inv_rot,
        }
    }

    /// Composition: `(a.compose(b)).transform_point(p) == a.transform(b.transform(p))`.
    pub fn compose(&self, other: &Pose3) -> Pose3 {
        Pose3 {
            translation: self.rotation * other.translation + self.translation,
            rotation: self.rotation * other.rotation,
        }
    }

    /// Relative pose of `other` expressed in this pose's frame.
    pub fn relative_to(&self, other: &Pose3) -> Pose3 {
        self.inverse().compose(other)
    }

    /// Rotation angle between the two orientations, radians in `[0, pi]`.
    pub fn rotation_distance(&self, other: &Pose3) -> f64 {
        self.rotation.angle_to(&other.rotation)
    }
}

/// One map entry: a scan with its registered pose.
#[derive(Debug, Clone)]
pub struct ScanRecord {
    pub id: i64,
    pub cloud: PointCloud,
    pub pose: Pose3,
    pub timestamp: Option<f64>,
}

/// Ground handling mode for [`preprocess`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundMode {
    ZThreshold,
    RansacPlane,
}

/// Range filtering and ground removal parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    /// Keep points with horizontal range `<= range_max` (meters).
    pub range_max: f64,
    pub ground_mode: GroundMode,
    /// Cut height above the estimated ground level (meters).
    pub ground_z: f64,
    pub ransac_iters: usize,
    /// Inlier distance for the RANSAC plane fit (meters).
    pub ransac_dist: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            range_max: 70.0,
            ground_mode: GroundMode::ZThreshold,
            ground_z: 0.3,
            ransac_iters: 100,
            ransac_dist: 0.15,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.range_max > 0.0) {
            return Err(Error::InvalidConfig("range_max must be > 0".into()));
        }
        if !(self.ground_z > 0.0) {
            return Err(Error::InvalidConfig("ground_z must be > 0".into()));
        }
        if !(self.ransac_dist > 0.0) {
            return Err(Error::InvalidConfig("ransac_dist must be > 0".into()));
        }
        Ok(())
    }
}

/// Minimum fraction of points that must sit in a thin slab around the
/// estimated ground level before the z-threshold mode removes anything.
/// A cloud whose ground has already been stripped fails this gate, which
/// makes preprocessing idempotent.
const GROUND_SLAB_MIN_FRACTION: f64 = 0.25;

/// Minimum inlier fraction for the RANSAC plane to count as ground.
const RANSAC_MIN_INLIER_FRACTION: f64 = 0.20;

/// Minimum |normal.z| for a RANSAC candidate plane (rejects walls).
const RANSAC_MIN_NORMAL_Z: f64 = 0.8;

/// Range-filter a cloud and remove the ground.
///
/// Points with horizontal range beyond `cfg.range_max` are dropped first.
/// Ground level is estimated from the 5th-percentile height so mounting
/// height does not need to be known; points at or below
/// `estimate + cfg.ground_z` are removed. Both ground modes detect whether a
/// ground layer is actually present and pass the cloud through unchanged
/// when it is not.
pub fn preprocess(cloud: &PointCloud, cfg: &PreprocessConfig) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    cfg.validate()?;

    let in_range: Vec<Point3> = cloud
        .points
        .iter()
        .filter(|p| p.range_2d() <= cfg.range_max)
        .copied()
        .collect();
    if in_range.is_empty() {
        return Err(Error::EmptyAfterFilter);
    }

    let kept = match cfg.ground_mode {
        GroundMode::ZThreshold => remove_ground_z(&in_range, cfg),
        GroundMode::RansacPlane => remove_ground_ransac(&in_range, cfg),
    };
    if kept.is_empty() {
        return Err(Error::EmptyAfterFilter);
    }
    Ok(PointCloud {
        points: kept,
        frame_id: cloud.frame_id.clone(),
    })
}

fn remove_ground_z(points: &[Point3], cfg: &PreprocessConfig) -> Vec<Point3> {
    let mut zs: Vec<f64> = points.iter().map(|p| p.z).collect();
    zs.sort_by(f64::total_cmp);
    let estimate = percentile(&zs, 0.05);
    let slab_halfwidth = cfg.ground_z * 0.5;
    let slab = points
        .iter()
        .filter(|p| (p.z - estimate).abs() <= slab_halfwidth)
        .count();
    if (slab as f64) < GROUND_SLAB_MIN_FRACTION * points.len() as f64 {
        return points.to_vec();
    }
    let cut = estimate + cfg.ground_z;
    points.iter().filter(|p| p.z > cut).copied().collect()
}

fn remove_ground_ransac(points: &[Point3], cfg: &PreprocessConfig) -> Vec<Point3> {
    use rand::{Rng, SeedableRng};

    if points.len() < 3 {
        return points.to_vec();
    }
    // Fixed seed: preprocessing must be deterministic.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5ca9_91a9);
    let n = points.len();
    let mut best: Option<(Vector3<f64>, f64, usize)> = None;
    for _ in 0..cfg.ransac_iters.max(1) {
        let ia = rng.random_range(0..n);
        let ib = rng.random_range(0..n);
        let ic = rng.random_range(0..n);
        if ia == ib || ib == ic || ia == ic {
            continue;
        }
        let a = points[ia].xyz();
        let normal = (points[ib].xyz() - a).cross(&(points[ic].xyz() - a));
        let norm = normal.norm();
        if norm < 1e-9 {
            continue;
        }
        let mut normal = normal / norm;
        if normal.z < 0.0 {
            normal = -normal;
        }
        if normal.z < RANSAC_MIN_NORMAL_Z {
            continue;
        }
        let d = normal.dot(&a);
        let inliers = points
            .iter()
            .filter(|p| (normal.dot(&p.xyz()) - d).abs() <= cfg.ransac_dist)
            .count();
        if best.as_ref().map_or(true, |b| inliers > b.2) {
            best = Some((normal, d, inliers));
        }
    }
    let Some((normal, d, inliers)) = best else {
        return points.to_vec();
    };
    if (inliers as f64) < RANSAC_MIN_INLIER_FRACTION * n as f64 {
        return points.to_vec();
    }
    points
        .iter()
        .filter(|p| normal.dot(&p.xyz()) - d > cfg.ransac_dist)
        .copied()
        .collect()
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Apply a rigid transform to every point: rotation, then translation.
pub fn transform_cloud(cloud: &PointCloud, pose: &Pose3) -> PointCloud {
    let points = cloud
        .points
        .iter()
        .map(|p| {
            let v = pose.transform_point(&p.xyz());
            Point3 {
                x: v.x,
                y: v.y,
                z: v.z,
                intensity: p.intensity,
            }
        })
        .collect();
    PointCloud {
        points,
        frame_id: cloud.frame_id.clone(),
    }
}
