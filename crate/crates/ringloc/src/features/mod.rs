//! Per-point local features and bird's-eye-view rasterization.
//!
//! Features are computed from each point's k-neighborhood and are invariant
//! to yaw and translation of the cloud (covariance eigenvalues and height
//! statistics do not depend on the horizontal frame), which is what makes
//! them safe inputs to the invariant representation downstream.
//!
//! Grid convention: cell `(ix, iy)` covers
//! `x in [-extent + ix*res, -extent + (ix+1)*res)` and likewise for y, so the
//! cell center sits at `((ix + 0.5) * res - extent, (iy + 0.5) * res - extent)`.

use nalgebra::{Matrix3, Vector3};
use ndarray::Array3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::scan_io::PointCloud;

/// Square BEV grid geometry plus the z-binning used for occupancy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Cells per side; must be even and at least 8.
    pub size: usize,
    /// Half-width in meters; the grid covers `[-extent, extent)^2`.
    pub extent: f64,
    pub z_bins: usize,
    pub z_min: f64,
    pub z_max: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            size: 120,
            extent: 70.0,
            z_bins: 20,
            z_min: -2.0,
            z_max: 8.0,
        }
    }
}

impl GridConfig {
    pub fn resolution(&self) -> f64 {
        2.0 * self.extent / self.size as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 8 || self.size % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "grid size {} must be even and >= 8",
                self.size
            )));
        }
        if !(self.extent > 0.0) {
            return Err(Error::InvalidConfig("grid extent must be > 0".into()));
        }
        if self.z_bins == 0 || !(self.z_max > self.z_min) {
            return Err(Error::InvalidConfig("bad z binning".into()));
        }
        Ok(())
    }
}

/// Multi-channel BEV grid. `data` has shape `(channels, size, size)` indexed
/// `[c, ix, iy]`; cells with no points are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBev {
    pub data: Array3<f64>,
    pub config: GridConfig,
}

impl FeatureBev {
    pub fn zeros(channels: usize, config: GridConfig) -> FeatureBev {
        FeatureBev {
            data: Array3::zeros((channels, config.size, config.size)),
            config,
        }
    }

    pub fn channels(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn size(&self) -> usize {
        self.data.shape()[1]
    }
}

/// Second-order statistics of one point's k-neighborhood.
///
/// Eigenvalues are sorted descending and clamped to be nonnegative; the 3D
/// covariance uses `1/k` normalization over the neighborhood's own mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborhoodStats {
    pub lambda3d: [f64; 3],
    pub lambda2d: [f64; 2],
    pub z_max: f64,
    pub z_min: f64,
    pub z_var: f64,
}

/// The six per-point features rasterized into BEV channels.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointFeature {
    pub change_of_curvature: f64,
    pub omni_variance: f64,
    pub eigen_entropy: f64,
    pub linearity_2d: f64,
    pub max_height_diff: f64,
    pub height_variance: f64,
}

impl PointFeature {
    pub const CHANNELS: usize = 6;

    pub fn to_array(self) -> [f64; 6] {
        [
            self.change_of_curvature,
            self.omni_variance,
            self.eigen_entropy,
            self.linearity_2d,
            self.max_height_diff,
            self.height_variance,
        ]
    }
}

/// Exact k-nearest-neighbor index lists, one per point, each including the
/// point itself, ascending by distance.
pub fn knn_indices(cloud: &PointCloud, k: usize) -> Result<Vec<Vec<usize>>> {
    if cloud.len() < k {
        return Err(Error::TooFewPoints {
            have: cloud.len(),
            need: k,
        });
    }
    let tree = KdTree::build(cloud);
    Ok(cloud
        .points
        .par_iter()
        .map(|p| tree.knn([p.x, p.y, p.z], k))
        .collect())
}

/// Covariance eigenvalues and height statistics for each neighborhood.
pub fn neighborhood_stats(
    cloud: &PointCloud,
    neighbors: &[Vec<usize>],
) -> Vec<NeighborhoodStats> {
    neighbors
        .par_iter()
        .map(|idx| single_stats(cloud, idx))
        .collect()
}

fn single_stats(cloud: &PointCloud, idx: &[usize]) -> NeighborhoodStats {
    let k = idx.len();
    let inv_k = 1.0 / k as f64;
    let mut mean = Vector3::zeros();
    for &i in idx {
        mean += cloud.points[i].xyz();
    }
    mean *= inv_k;

    let mut cov = Matrix3::zeros();
    let (mut cxx2, mut cxy2, mut cyy2) = (0.0, 0.0, 0.0);
    let mut z_min = f64::INFINITY;
    let mut z_max = f64::NEG_INFINITY;
    for &i in idx {
        let d = cloud.points[i].xyz() - mean;
        cov += d * d.transpose();
        cxx2 += d.x * d.x;
        cxy2 += d.x * d.y;
        cyy2 += d.y * d.y;
        z_min = z_min.min(cloud.points[i].z);
        z_max = z_max.max(cloud.points[i].z);
    }
    cov *= inv_k;
    let z_var = cov[(2, 2)];

    let mut lambda3d: Vec<f64> = cov
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0))
        .collect();
    lambda3d.sort_by(|a, b| b.total_cmp(a));

    let lambda2d = eig2x2_sym(cxx2 * inv_k, cxy2 * inv_k, cyy2 * inv_k);

    NeighborhoodStats {
        lambda3d: [lambda3d[0], lambda3d[1], lambda3d[2]],
        lambda2d,
        z_max,
        z_min,
        z_var,
    }
}

/// Eigenvalues of `[[a, b], [b, c]]`, descending, clamped nonnegative.
fn eig2x2_sym(a: f64, b: f64, c: f64) -> [f64; 2] {
    let half_tr = 0.5 * (a + c);
    let det = a * c - b * b;
    let disc = (half_tr * half_tr - det).max(0.0).sqrt();
    [(half_tr + disc).max(0.0), (half_tr - disc).max(0.0)]
}

/// Derive the six features from neighborhood statistics.
///
/// Degenerate cases are defined, not errors: whenever a denominator is
/// zero (all eigenvalues zero, or a flat 2D spread), the affected feature
/// is 0. With `entropy_normalized` the entropy uses eigenvalues divided by
/// their sum, making it scale-invariant; the raw variant uses the metric
/// eigenvalues directly.
pub fn point_features(stats: &NeighborhoodStats, entropy_normalized: bool) -> PointFeature {
    let [l1, l2, l3] = stats.lambda3d;
    let sum = l1 + l2 + l3;
    let (change_of_curvature, omni_variance, eigen_entropy) = if sum > 0.0 {
        let c1 = l3 / sum;
        let c2 = (l1 * l2 * l3).cbrt() / sum;
        let c3 = if entropy_normalized {
            -[l1, l2, l3]
                .iter()
                .map(|&l| {
                    let e = l / sum;
                    if e > 0.0 {
                        e * e.ln()
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
        } else {
            -[l1, l2, l3]
                .iter()
                .map(|&l| if l > 0.0 { l * l.ln() } else { 0.0 })
                .sum::<f64>()
        };
        (c1, c2, c3)
    } else {
        (0.0, 0.0, 0.0)
    };
    let linearity_2d = if stats.lambda2d[0] > 0.0 {
        stats.lambda2d[1] / stats.lambda2d[0]
    } else {
        0.0
    };
    PointFeature {
        change_of_curvature,
        omni_variance,
        eigen_entropy,
        linearity_2d,
        max_height_diff: stats.z_max - stats.z_min,
        height_variance: stats.z_var,
    }
}

/// kNN + statistics + feature evaluation for a whole cloud.
pub fn compute_point_features(
    cloud: &PointCloud,
    k: usize,
    entropy_normalized: bool,
) -> Result<Vec<PointFeature>> {
    let neighbors = knn_indices(cloud, k)?;
    let stats = neighborhood_stats(cloud, &neighbors);
    Ok(stats
        .iter()
        .map(|s| point_features(s, entropy_normalized))
        .collect())
}

/// Rasterize per-point features into a 6-channel BEV with channel-wise max
/// pooling. Points outside the grid extent are dropped.
pub fn rasterize_bev(
    cloud: &PointCloud,
    feats: &[PointFeature],
    cfg: &GridConfig,
) -> Result<FeatureBev> {
    cfg.validate()?;
    if feats.len() != cloud.len() {
        return Err(Error::ShapeMismatch {
            a: vec![cloud.len()],
            b: vec![feats.len()],
        });
    }
    let mut bev = FeatureBev::zeros(PointFeature::CHANNELS, *cfg);
    let res = cfg.resolution();
    for (p, f) in cloud.points.iter().zip(feats) {
        let Some((ix, iy)) = cell_of(p.x, p.y, cfg.extent, res, cfg.size) else {
            continue;
        };
        for (c, v) in f.to_array().into_iter().enumerate() {
            let cell = &mut bev.data[[c, ix, iy]];
            if v > *cell {
                *cell = v;
            }
        }
    }
    Ok(bev)
}

/// Single-channel occupancy BEV: voxelize into `z_bins` height slices and
/// store the number of occupied slices per column.
pub fn occupancy_bev(cloud: &PointCloud, cfg: &GridConfig) -> Result<FeatureBev> {
    cfg.validate()?;
    let res = cfg.resolution();
    let z_res = (cfg.z_max - cfg.z_min) / cfg.z_bins as f64;
    let mut occupied = vec![false; cfg.size * cfg.size * cfg.z_bins];
    for p in &cloud.points {
        let Some((ix, iy)) = cell_of(p.x, p.y, cfg.extent, res, cfg.size) else {
            continue;
        };
        if p.z < cfg.z_min || p.z >= cfg.z_max {
            continue;
        }
        let iz = (((p.z - cfg.z_min) / z_res) as usize).min(cfg.z_bins - 1);
        occupied[(ix * cfg.size + iy) * cfg.z_bins + iz] = true;
    }
    let mut bev = FeatureBev::zeros(1, *cfg);
    for ix in 0..cfg.size {
        for iy in 0..cfg.size {
            let base = (ix * cfg.size + iy) * cfg.z_bins;
            let count = occupied[base..base + cfg.z_bins]
                .iter()
                .filter(|&&o| o)
                .count();
            bev.data[[0, ix, iy]] = count as f64;
        }
    }
    Ok(bev)
}

fn cell_of(x: f64, y: f64, extent: f64, res: f64, size: usize) -> Option<(usize, usize)> {
    let fx = (x + extent) / res;
    let fy = (y + extent) / res;
    if fx < 0.0 || fy < 0.0 {
        return None;
    }
    let ix = fx as usize;
    let iy = fy as usize;
    (ix < size && iy < size).then_some((ix, iy))
}

#[cfg(test)]
mod tests;
