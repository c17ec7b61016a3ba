//! Brute-force reference implementations used to verify the FFT and
//! projection code paths. Naive loops, no transforms; intended for small
//! inputs (grids up to about 64 cells per side).

use ndarray::{Array2, Array3};

use crate::features::FeatureBev;
use crate::transforms::{CorrMap1d, CorrMap2d, Sinogram};

/// Direct per-cell projection: each cell's mass goes to the tau bin at
/// `x cos(theta) + y sin(theta)` with linear splatting.
pub fn oracle_radon(bev: &FeatureBev) -> Sinogram {
    let shape = bev.data.shape();
    let (channels, n) = (shape[0], shape[1]);
    assert_eq!(shape[1], shape[2], "oracle expects a square grid");
    let res = bev.config.resolution();
    let extent = bev.config.extent;
    let t_max = extent * std::f64::consts::SQRT_2;
    let d_tau = 2.0 * t_max / n as f64;

    let mut data = Array3::zeros((channels, n, n));
    for j in 0..n {
        let theta = std::f64::consts::TAU * j as f64 / n as f64;
        for ix in 0..n {
            for iy in 0..n {
                let x = (ix as f64 + 0.5) * res - extent;
                let y = (iy as f64 + 0.5) * res - extent;
                let t = (x * theta.cos() + y * theta.sin() + t_max) / d_tau - 0.5;
                let k0 = t.floor() as i64;
                let frac = t - t.floor();
                for c in 0..channels {
                    let m = bev.data[[c, ix, iy]];
                    if m == 0.0 {
                        continue;
                    }
                    if k0 >= 0 && (k0 as usize) < n {
                        data[[c, j, k0 as usize]] += m * (1.0 - frac);
                    }
                    if k0 + 1 >= 0 && ((k0 + 1) as usize) < n {
                        data[[c, j, (k0 + 1) as usize]] += m * frac;
                    }
                }
            }
        }
    }
    Sinogram {
        data,
        theta_axis: (0..n)
            .map(|j| std::f64::consts::TAU * j as f64 / n as f64)
            .collect(),
        tau_axis: (0..n)
            .map(|k| -t_max + (k as f64 + 0.5) * d_tau)
            .collect(),
    }
}

/// Double-loop circular correlation over row shifts.
pub fn oracle_corr1d(a: &Array3<f64>, b: &Array3<f64>) -> CorrMap1d {
    assert_eq!(a.shape(), b.shape());
    let shape = a.shape();
    let (channels, n, m) = (shape[0], shape[1], shape[2]);
    let mut values = vec![0.0; n];
    for (k, v) in values.iter_mut().enumerate() {
        let mut s = 0.0;
        for c in 0..channels {
            for j in 0..n {
                let jk = (j + k) % n;
                for w in 0..m {
                    s += a[[c, jk, w]] * b[[c, j, w]];
                }
            }
        }
        *v = s;
    }
    CorrMap1d { values }
}

/// Quadruple-loop circular 2D correlation, channel-summed.
pub fn oracle_corr2d(a: &Array3<f64>, b: &Array3<f64>) -> CorrMap2d {
    assert_eq!(a.shape(), b.shape());
    let shape = a.shape();
    let (channels, h, w) = (shape[0], shape[1], shape[2]);
    let mut values = Array2::zeros((h, w));
    for kx in 0..h {
        for ky in 0..w {
            let mut s = 0.0;
            for c in 0..channels {
                for i in 0..h {
                    for j in 0..w {
                        s += a[[c, (i + kx) % h, (j + ky) % w]] * b[[c, i, j]];
                    }
                }
            }
            values[[kx, ky]] = s;
        }
    }
    CorrMap2d { values }
}
