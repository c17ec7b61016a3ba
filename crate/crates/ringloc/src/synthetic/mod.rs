//! Deterministic synthetic worlds, scans, and benchmark sets with exact
//! ground truth.
//!
//! Reproducibility: all randomness comes from ChaCha8 streams seeded through
//! [`derive_seed`] (a splitmix64 mix of a base seed and a role tag), and
//! Gaussian noise uses an explicit Box-Muller transform. The same spec and
//! seed therefore produce bit-identical outputs on any platform with IEEE-754
//! doubles, and per-scan streams are independent so generation may be
//! parallelized per scan.

pub mod oracles;

use std::f64::consts::TAU;
use std::path::Path;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scan_io::{
    save_cloud, save_poses, CloudFormat, Point3, PointCloud, Pose3, ScanRecord,
};

/// What to build into a synthetic world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSpec {
    pub seed: u64,
    /// Half-width of the world in meters.
    pub extent: f64,
    pub n_walls: usize,
    pub n_boxes: usize,
    pub n_posts: usize,
    /// Surface sampling density.
    pub points_per_m2: f64,
    pub ground: bool,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            seed: 0,
            extent: 50.0,
            n_walls: 12,
            n_boxes: 8,
            n_posts: 10,
            points_per_m2: 6.0,
            ground: true,
        }
    }
}

/// Range crop, dropout, and additive noise applied when rendering a scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSpec {
    pub range_max: f64,
    pub dropout: f64,
    pub noise_sigma: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        SensorSpec {
            range_max: 70.0,
            dropout: 0.0,
            noise_sigma: 0.02,
        }
    }
}

/// Map/query trajectory layout for [`make_benchmark`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkConfig {
    /// Circumference of the loop trajectory in meters.
    pub loop_length: f64,
    /// Spacing between stored map scans along the loop.
    pub place_density: f64,
    /// Spacing between query scans along the loop.
    pub query_spacing: f64,
    /// Queries are offset radially by up to this much (uniform).
    pub lateral_offset_max: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            loop_length: 200.0,
            place_density: 20.0,
            query_spacing: 5.0,
            lateral_offset_max: 3.0,
        }
    }
}

/// Ground-truth relative pose of a query expressed in a map scan's frame.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GtRelPose {
    pub query_id: i64,
    pub map_id: i64,
    pub rel: Pose3,
}

/// A generated benchmark: map scans, query scans, and exact ground truth.
#[derive(Debug, Clone)]
pub struct BenchmarkSet {
    pub map_scans: Vec<ScanRecord>,
    pub query_scans: Vec<ScanRecord>,
    /// Per query: relative pose w.r.t. the nearest map scan.
    pub gt_rel_poses: Vec<GtRelPose>,
    /// Consecutive map-to-map relative poses around the loop (wrapping), so
    /// their composition closes to identity.
    pub map_loop_rels: Vec<Pose3>,
    pub scene: SceneSpec,
    pub sensor: SensorSpec,
    pub bench: BenchmarkConfig,
    pub seed: u64,
}

/// splitmix64 mix of a base seed and a stream tag.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; explicit so the noise stream is pinned to this crate
    // rather than to a distribution crate's internals.
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

/// Deterministically sample a synthetic world as surface points.
///
/// Walls, boxes, and posts are placed uniformly inside the world extent.
/// Every scene with at least one structure also contains an L-shaped
/// landmark with unequal arms, which breaks all rotational symmetries and
/// keeps rotation estimation well posed.
pub fn generate_scene(spec: &SceneSpec) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 0x5ce9e));
    let mut points: Vec<Point3> = Vec::new();
    let density = spec.points_per_m2;
    let r_place = 0.85 * spec.extent;

    for _ in 0..spec.n_walls {
        let cx = rng.random_range(-r_place..r_place);
        let cy = rng.random_range(-r_place..r_place);
        let yaw = rng.random_range(0.0..TAU);
        let len = rng.random_range(4.0..12.0);
        let height = rng.random_range(2.0..4.0);
        sample_wall(&mut rng, &mut points, cx, cy, yaw, len, height, density);
    }
    for _ in 0..spec.n_boxes {
        let cx = rng.random_range(-r_place..r_place);
        let cy = rng.random_range(-r_place..r_place);
        let yaw = rng.random_range(0.0..TAU);
        let sx = rng.random_range(1.0..3.0);
        let sy = rng.random_range(1.0..3.0);
        let sz = rng.random_range(1.0..3.0);
        sample_box(&mut rng, &mut points, cx, cy, yaw, sx, sy, sz, density);
    }
    for _ in 0..spec.n_posts {
        let cx = rng.random_range(-r_place..r_place);
        let cy = rng.random_range(-r_place..r_place);
        let radius = rng.random_range(0.1..0.3);
        let height = rng.random_range(2.0..5.0);
        sample_post(&mut rng, &mut points, cx, cy, radius, height, density);
    }
    if spec.n_walls + spec.n_boxes + spec.n_posts > 0 {
        // The unique landmark: two perpendicular walls of unequal length.
        let cx = rng.random_range(-0.6 * spec.extent..0.6 * spec.extent);
        let cy = rng.random_range(-0.6 * spec.extent..0.6 * spec.extent);
        let yaw = rng.random_range(0.0..TAU);
        sample_wall(&mut rng, &mut points, cx, cy, yaw, 9.0, 3.5, density);
        let (s, c) = yaw.sin_cos();
        sample_wall(
            &mut rng,
            &mut points,
            cx + 4.5 * c - 2.5 * s,
            cy + 4.5 * s + 2.5 * c,
            yaw + std::f64::consts::FRAC_PI_2,
            5.0,
            3.5,
            density,
        );
    }
    if spec.ground {
        let area = std::f64::consts::PI * spec.extent * spec.extent;
        let n = (area * density) as usize;
        for _ in 0..n {
            let r = spec.extent * rng.random::<f64>().sqrt();
            let phi = rng.random_range(0.0..TAU);
            points.push(Point3::new(r * phi.cos(), r * phi.sin(), 0.0));
        }
    }
    PointCloud {
        points,
        frame_id: "world".to_string(),
    }
}

#[allow(clippy::too_many_arguments)]
fn sample_wall(
    rng: &mut ChaCha8Rng,
    out: &mut Vec<Point3>,
    cx: f64,
    cy: f64,
    yaw: f64,
    len: f64,
    height: f64,
    density: f64,
) {
    let n = (len * height * density).round() as usize;
    let (s, c) = yaw.sin_cos();
    for _ in 0..n {
        let along = rng.random_range(-0.5 * len..0.5 * len);
        let z = rng.random_range(0.0..height);
        out.push(Point3::new(cx + along * c, cy + along * s, z));
    }
}

#[allow(clippy::too_many_arguments)]
fn sample_box(
    rng: &mut ChaCha8Rng,
    out: &mut Vec<Point3>,
    cx: f64,
    cy: f64,
    yaw: f64,
    sx: f64,
    sy: f64,
    sz: f64,
    density: f64,
) {
    let (s, c) = yaw.sin_cos();
    let mut push = |lx: f64, ly: f64, z: f64| {
        out.push(Point3::new(cx + lx * c - ly * s, cy + lx * s + ly * c, z));
    };
    // Four side faces plus the top.
    for (face_area, face) in [
        (sx * sz, 0),
        (sx * sz, 1),
        (sy * sz, 2),
        (sy * sz, 3),
        (sx * sy, 4),
    ] {
        let n = (face_area * density).round() as usize;
        for _ in 0..n {
            match face {
                0 | 1 => {
                    let lx = rng.random_range(-0.5 * sx..0.5 * sx);
                    let z = rng.random_range(0.0..sz);
                    let ly = if face == 0 { -0.5 * sy } else { 0.5 * sy };
                    push(lx, ly, z);
                }
                2 | 3 => {
                    let ly = rng.random_range(-0.5 * sy..0.5 * sy);
                    let z = rng.random_range(0.0..sz);
                    let lx = if face == 2 { -0.5 * sx } else { 0.5 * sx };
                    push(lx, ly, z);
                }
                _ => {
                    let lx = rng.random_range(-0.5 * sx..0.5 * sx);
                    let ly = rng.random_range(-0.5 * sy..0.5 * sy);
                    push(lx, ly, sz);
                }
            }
        }
    }
}

fn sample_post(
    rng: &mut ChaCha8Rng,
    out: &mut Vec<Point3>,
    cx: f64,
    cy: f64,
    radius: f64,
    height: f64,
    density: f64,
) {
    let n = (TAU * radius * height * density).round().max(8.0) as usize;
    for _ in 0..n {
        let phi = rng.random_range(0.0..TAU);
        let z = rng.random_range(0.0..height);
        out.push(Point3::new(
            cx + radius * phi.cos(),
            cy + radius * phi.sin(),
            z,
        ));
    }
}

/// Render the world as seen from `pose`: crop to `range_max` around the
/// sensor, express in the sensor frame, add Gaussian noise, apply dropout.
pub fn render_scan(
    world: &PointCloud,
    pose: &Pose3,
    sensor: &SensorSpec,
    seed: u64,
) -> Result<PointCloud> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inv = pose.inverse();
    let origin = pose.translation;
    let mut points = Vec::new();
    for p in &world.points {
        if (p.xyz() - origin).norm() > sensor.range_max {
            continue;
        }
        if sensor.dropout > 0.0 && rng.random::<f64>() < sensor.dropout {
            continue;
        }
        let mut q = inv.transform_point(&p.xyz());
        if sensor.noise_sigma > 0.0 {
            q += Vector3::new(
                gaussian(&mut rng) * sensor.noise_sigma,
                gaussian(&mut rng) * sensor.noise_sigma,
                gaussian(&mut rng) * sensor.noise_sigma,
            );
        }
        points.push(Point3 {
            x: q.x,
            y: q.y,
            z: q.z,
            intensity: p.intensity,
        });
    }
    if points.is_empty() {
        return Err(Error::EmptyScan);
    }
    Ok(PointCloud {
        points,
        frame_id: String::new(),
    })
}

const MAP_SEED_TAG: u64 = 0x4d41_5000_0000_0000;
const QUERY_SEED_TAG: u64 = 0x5155_4500_0000_0000;
const BENCH_SEED_TAG: u64 = 0xbe9c_0000_0000_0000;

/// Generate a loop-trajectory benchmark with exact ground truth.
///
/// Map scans sit on a circle of circumference `loop_length` at
/// `place_density` spacing with tangent heading; queries sample the same
/// loop at `query_spacing` with uniformly random yaw and a uniform radial
/// offset up to `lateral_offset_max`.
pub fn make_benchmark(
    scene: &SceneSpec,
    bench: &BenchmarkConfig,
    sensor: &SensorSpec,
    seed: u64,
) -> Result<BenchmarkSet> {
    let world = generate_scene(scene);
    let radius = bench.loop_length / TAU;
    let n_map = (bench.loop_length / bench.place_density).floor() as usize;
    let n_query = (bench.loop_length / bench.query_spacing).floor() as usize;
    if n_map == 0 || n_query == 0 {
        return Err(Error::InvalidConfig(
            "loop too short for the requested spacing".into(),
        ));
    }

    let mut map_scans = Vec::with_capacity(n_map);
    for i in 0..n_map {
        let arc = i as f64 * bench.place_density;
        let phi = arc / radius;
        let pose = Pose3::from_xy_yaw(
            radius * phi.cos(),
            radius * phi.sin(),
            phi + std::f64::consts::FRAC_PI_2,
        );
        let cloud = render_scan(&world, &pose, sensor, derive_seed(seed, MAP_SEED_TAG + i as u64))
            .map_err(|e| e.for_scan(i as i64))?;
        map_scans.push(ScanRecord {
            id: i as i64,
            cloud,
            pose,
            timestamp: Some(arc),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, BENCH_SEED_TAG));
    let mut query_scans = Vec::with_capacity(n_query);
    let mut gt_rel_poses = Vec::with_capacity(n_query);
    for j in 0..n_query {
        let arc = j as f64 * bench.query_spacing;
        let phi = arc / radius;
        let yaw = rng.random_range(0.0..TAU);
        let lateral = rng.random_range(-bench.lateral_offset_max..bench.lateral_offset_max);
        let r = radius + lateral;
        let pose = Pose3::from_xy_yaw(r * phi.cos(), r * phi.sin(), yaw);
        let cloud = render_scan(
            &world,
            &pose,
            sensor,
            derive_seed(seed, QUERY_SEED_TAG + j as u64),
        )
        .map_err(|e| e.for_scan(j as i64))?;

        let nearest = map_scans
            .iter()
            .min_by(|a, b| {
                let da = (a.pose.translation - pose.translation).norm();
                let db = (b.pose.translation - pose.translation).norm();
                da.total_cmp(&db).then(a.id.cmp(&b.id))
            })
            .expect("nonempty map");
        gt_rel_poses.push(GtRelPose {
            query_id: j as i64,
            map_id: nearest.id,
            rel: nearest.pose.relative_to(&pose),
        });
        query_scans.push(ScanRecord {
            id: j as i64,
            cloud,
            pose,
            timestamp: Some(arc),
        });
    }

    let map_loop_rels = (0..n_map)
        .map(|i| map_scans[i].pose.relative_to(&map_scans[(i + 1) % n_map].pose))
        .collect();

    Ok(BenchmarkSet {
        map_scans,
        query_scans,
        gt_rel_poses,
        map_loop_rels,
        scene: *scene,
        sensor: *sensor,
        bench: *bench,
        seed,
    })
}

/// On-disk manifest describing a saved benchmark.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkManifest {
    pub scene: SceneSpec,
    pub sensor: SensorSpec,
    pub bench: BenchmarkConfig,
    pub seed: u64,
    pub n_map: usize,
    pub n_query: usize,
    pub gt_rel_poses: Vec<GtRelPose>,
}

impl BenchmarkSet {
    /// Write `map/`, `query/` (headerless f32 records), pose CSVs, and a
    /// JSON manifest with the specs, seed, and ground-truth relative poses.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir.join("map"))?;
        std::fs::create_dir_all(dir.join("query"))?;
        for scan in &self.map_scans {
            save_cloud(
                &scan.cloud,
                &dir.join("map").join(format!("{:06}.bin", scan.id)),
                CloudFormat::BinF32,
            )?;
        }
        for scan in &self.query_scans {
            save_cloud(
                &scan.cloud,
                &dir.join("query").join(format!("{:06}.bin", scan.id)),
                CloudFormat::BinF32,
            )?;
        }
        let map_poses: Vec<(i64, Pose3)> =
            self.map_scans.iter().map(|s| (s.id, s.pose)).collect();
        let query_poses: Vec<(i64, Pose3)> =
            self.query_scans.iter().map(|s| (s.id, s.pose)).collect();
        save_poses(&dir.join("map_poses.csv"), &map_poses)?;
        save_poses(&dir.join("query_poses.csv"), &query_poses)?;
        let manifest = BenchmarkManifest {
            scene: self.scene,
            sensor: self.sensor,
            bench: self.bench,
            seed: self.seed,
            n_map: self.map_scans.len(),
            n_query: self.query_scans.len(),
            gt_rel_poses: self.gt_rel_poses.clone(),
        };
        let file = std::fs::File::create(dir.join("manifest.json"))?;
        serde_json::to_writer_pretty(file, &manifest)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests;
