//! The representation pass: discrete Radon transform, row-wise spectral
//! magnitudes, normalization, and FFT-based circular correlation.
//!
//! How the pieces fit together:
//!
//! * [`radon`] projects a square BEV into a sinogram `(theta, tau)`. Rotating
//!   the grid contents by one angular bin circularly shifts sinogram rows by
//!   one; translating the contents shifts each row along tau by an
//!   angle-dependent offset.
//! * [`ting`] takes row-wise DFT magnitudes along tau, which removes the
//!   translation-induced row shifts while keeping the rotation-induced row
//!   ordering. The result is translation invariant and rotation equivariant.
//! * [`circular_corr`] correlates two normalized spectra over all row shifts
//!   at once; its peak value scores place similarity and its peak index is a
//!   global rotation estimate.
//! * [`corr2d`] correlates two BEVs over all planar shifts; after rotation
//!   compensation its peak is a global translation estimate.
//!
//! Correlation sign convention, used everywhere: `corr(a, b)[k] = sum_j
//! <a[j + k], b[j]>` with circular indexing, so the peak sits at the `k` for
//! which `b[j] = a[j + k]`. Rolling `b`'s contents forward (toward higher
//! indices) by `s` relative to `a` puts the peak of `corr(a, b)` at `n - s`
//! and the peak of `corr(b, a)` at `s`.

use ndarray::{Array2, Array3};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::features::FeatureBev;

/// Radon parameter grid: `data[c, j, k]` is the line integral of channel `c`
/// along the line at angle `theta_axis[j]`, offset `tau_axis[k]` meters from
/// the grid center.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    pub data: Array3<f64>,
    pub theta_axis: Vec<f64>,
    pub tau_axis: Vec<f64>,
}

impl Sinogram {
    pub fn n_theta(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn n_tau(&self) -> usize {
        self.data.shape()[2]
    }
}

/// Row-wise one-sided DFT magnitudes of a sinogram, DC bin included.
#[derive(Debug, Clone, PartialEq)]
pub struct Ting {
    pub data: Array3<f64>,
    /// Frequency of each bin in cycles per meter along tau.
    pub omega_axis: Vec<f64>,
}

/// A [`Ting`] shifted to zero mean and scaled to unit Frobenius norm, so the
/// self-correlation peak of any scan is exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedTing {
    pub data: Array3<f64>,
}

/// Circular correlation over row shifts `k` in `[0, n_theta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrMap1d {
    pub values: Vec<f64>,
}

impl CorrMap1d {
    /// Argmax with ties broken toward the lowest shift.
    pub fn peak(&self) -> (usize, f64) {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, &v) in self.values.iter().enumerate() {
            if v > best.1 {
                best = (i, v);
            }
        }
        best
    }
}

/// Circular 2D correlation over cell shifts `(kx, ky)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrMap2d {
    pub values: Array2<f64>,
}

impl CorrMap2d {
    /// Argmax with ties broken toward the lowest `(kx, ky)` in scan order.
    pub fn peak(&self) -> ((usize, usize), f64) {
        let mut best = ((0usize, 0usize), f64::NEG_INFINITY);
        for ((i, j), &v) in self.values.indexed_iter() {
            if v > best.1 {
                best = ((i, j), v);
            }
        }
        best
    }

    /// Peak location refined per axis by a 3-point parabolic fit over the
    /// circular neighborhood, as fractional (possibly negative) cell shifts.
    pub fn peak_subcell(&self) -> ((f64, f64), f64) {
        let ((ki, kj), v) = self.peak();
        let (h, w) = self.values.dim();
        let at = |i: i64, j: i64| {
            self.values[[i.rem_euclid(h as i64) as usize, j.rem_euclid(w as i64) as usize]]
        };
        let di = parabolic_offset(
            at(ki as i64 - 1, kj as i64),
            v,
            at(ki as i64 + 1, kj as i64),
        );
        let dj = parabolic_offset(
            at(ki as i64, kj as i64 - 1),
            v,
            at(ki as i64, kj as i64 + 1),
        );
        let x = wrap_shift(ki, h) + di;
        let y = wrap_shift(kj, w) + dj;
        ((x, y), v)
    }
}

/// Map a circular shift index to a signed shift, wrapping indices above
/// `n / 2` to negative values.
pub fn wrap_shift(k: usize, n: usize) -> f64 {
    if k > n / 2 {
        k as f64 - n as f64
    } else {
        k as f64
    }
}

fn parabolic_offset(left: f64, center: f64, right: f64) -> f64 {
    let denom = left - 2.0 * center + right;
    if denom >= -1e-300 {
        return 0.0;
    }
    (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
}

/// Discrete Radon transform of a square BEV.
///
/// Each grid cell's mass is projected onto the tau axis at
/// `x cos(theta) + y sin(theta)` with linear splatting, independently per
/// channel and per angle row. The tau axis spans `[-extent*sqrt(2),
/// extent*sqrt(2)]` so no corner mass is ever clipped, and every row
/// therefore sums to the total grid mass. Angles sample the full circle:
/// `theta_j = 2*pi*j / n` with `n = size` rows and tau bins.
pub fn radon(bev: &FeatureBev) -> Result<Sinogram> {
    let shape = bev.data.shape();
    let (channels, n) = (shape[0], shape[1]);
    if shape[1] != shape[2] {
        return Err(Error::NonSquareInput(shape[1], shape[2]));
    }
    let res = bev.config.resolution();
    let extent = bev.config.extent;
    let t_max = extent * std::f64::consts::SQRT_2;
    let n_tau = n;
    let d_tau = 2.0 * t_max / n_tau as f64;

    // Gather occupied cells once; typical BEVs are sparse.
    let mut positions: Vec<(f64, f64)> = Vec::new();
    let mut masses: Vec<f64> = Vec::new();
    for ix in 0..n {
        for iy in 0..n {
            if (0..channels).any(|c| bev.data[[c, ix, iy]] != 0.0) {
                positions.push((
                    (ix as f64 + 0.5) * res - extent,
                    (iy as f64 + 0.5) * res - extent,
                ));
                for c in 0..channels {
                    masses.push(bev.data[[c, ix, iy]]);
                }
            }
        }
    }

    let rows: Vec<Array2<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let theta = std::f64::consts::TAU * j as f64 / n as f64;
            let (sin_t, cos_t) = theta.sin_cos();
            let mut row = Array2::zeros((channels, n_tau));
            for (i, &(x, y)) in positions.iter().enumerate() {
                let u = x * cos_t + y * sin_t;
                let t = (u + t_max) / d_tau - 0.5;
                let k0 = t.floor();
                let frac = t - k0;
                let k0 = k0 as i64;
                for c in 0..channels {
                    let m = masses[i * channels + c];
                    if m == 0.0 {
                        continue;
                    }
                    if k0 >= 0 && (k0 as usize) < n_tau {
                        row[[c, k0 as usize]] += m * (1.0 - frac);
                    }
                    let k1 = k0 + 1;
                    if k1 >= 0 && (k1 as usize) < n_tau {
                        row[[c, k1 as usize]] += m * frac;
                    }
                }
            }
            row
        })
        .collect();

    let mut data = Array3::zeros((channels, n, n_tau));
    for (j, row) in rows.into_iter().enumerate() {
        for c in 0..channels {
            for k in 0..n_tau {
                data[[c, j, k]] = row[[c, k]];
            }
        }
    }
    Ok(Sinogram {
        data,
        theta_axis: (0..n)
            .map(|j| std::f64::consts::TAU * j as f64 / n as f64)
            .collect(),
        tau_axis: (0..n_tau)
            .map(|k| -t_max + (k as f64 + 0.5) * d_tau)
            .collect(),
    })
}

/// Rotate grid contents by `angle` about the grid center (bilinear sampling,
/// zero fill outside). `rotate_bev(f, a)` evaluated at `p` samples `f` at
/// `R(-a) p`, i.e. the contents turn counterclockwise by `a`.
pub fn rotate_bev(bev: &FeatureBev, angle: f64) -> FeatureBev {
    let shape = bev.data.shape();
    let (channels, h, w) = (shape[0], shape[1], shape[2]);
    let c = (h as f64 - 1.0) / 2.0;
    let (sin_a, cos_a) = angle.sin_cos();
    let mut out = Array3::zeros((channels, h, w));
    for i in 0..h {
        let di = i as f64 - c;
        for j in 0..w {
            let dj = j as f64 - c;
            let sx = cos_a * di + sin_a * dj + c;
            let sy = -sin_a * di + cos_a * dj + c;
            let x0 = sx.floor();
            let y0 = sy.floor();
            let fx = sx - x0;
            let fy = sy - y0;
            let (x0, y0) = (x0 as i64, y0 as i64);
            for ch in 0..channels {
                let mut acc = 0.0;
                for (xi, wx) in [(x0, 1.0 - fx), (x0 + 1, fx)] {
                    if xi < 0 || xi >= h as i64 || wx == 0.0 {
                        continue;
                    }
                    for (yi, wy) in [(y0, 1.0 - fy), (y0 + 1, fy)] {
                        if yi < 0 || yi >= w as i64 || wy == 0.0 {
                            continue;
                        }
                        acc += wx * wy * bev.data[[ch, xi as usize, yi as usize]];
                    }
                }
                out[[ch, i, j]] = acc;
            }
        }
    }
    FeatureBev {
        data: out,
        config: bev.config,
    }
}

/// Test utility exposing the sinogram's rotation equivariance directly.
///
/// Rotates the BEV contents by `alpha_bin` angular bins, takes both radon
/// transforms, and returns the maximum absolute discrepancy between the
/// rotated sinogram and the row-shifted original over interior tau bins
/// (`|tau| <= extent`, where content inside the inscribed disc projects).
pub fn sinogram_shift_property_check(bev: &FeatureBev, alpha_bin: i64) -> Result<f64> {
    let sg = radon(bev)?;
    let n = sg.n_theta() as i64;
    let angle = std::f64::consts::TAU * alpha_bin as f64 / n as f64;
    let sg_rot = radon(&rotate_bev(bev, angle))?;

    let channels = sg.data.shape()[0];
    let extent = bev.config.extent;
    let mut worst: f64 = 0.0;
    for c in 0..channels {
        for j in 0..n {
            let j_src = (j - alpha_bin).rem_euclid(n) as usize;
            for (k, &tau) in sg.tau_axis.iter().enumerate() {
                if tau.abs() > extent {
                    continue;
                }
                let d = (sg_rot.data[[c, j as usize, k]] - sg.data[[c, j_src, k]]).abs();
                worst = worst.max(d);
            }
        }
    }
    Ok(worst)
}

/// Row-wise one-sided DFT magnitude of a sinogram, DC retained.
pub fn ting(sg: &Sinogram) -> Ting {
    let shape = sg.data.shape();
    let (channels, n_theta, n_tau) = (shape[0], shape[1], shape[2]);
    let n_omega = n_tau / 2 + 1;
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n_tau);
    let mut data = Array3::zeros((channels, n_theta, n_omega));
    let mut buf = vec![Complex64::new(0.0, 0.0); n_tau];
    for c in 0..channels {
        for j in 0..n_theta {
            for k in 0..n_tau {
                buf[k] = Complex64::new(sg.data[[c, j, k]], 0.0);
            }
            fft.process(&mut buf);
            for w in 0..n_omega {
                data[[c, j, w]] = buf[w].norm();
            }
        }
    }
    let d_tau = sg.tau_axis.get(1).map_or(1.0, |t1| t1 - sg.tau_axis[0]);
    Ting {
        data,
        omega_axis: (0..n_omega)
            .map(|m| m as f64 / (n_tau as f64 * d_tau))
            .collect(),
    }
}

/// Shift to zero mean and scale to unit Frobenius norm.
pub fn normalize_ting(t: &Ting) -> Result<NormalizedTing> {
    Ok(NormalizedTing {
        data: normalize_array(&t.data)?,
    })
}

/// The same normalization applied to a BEV, as required before [`corr2d`].
pub fn normalize_bev(bev: &FeatureBev) -> Result<FeatureBev> {
    Ok(FeatureBev {
        data: normalize_array(&bev.data)?,
        config: bev.config,
    })
}

fn normalize_array(data: &Array3<f64>) -> Result<Array3<f64>> {
    let len = data.len() as f64;
    let mean = data.sum() / len;
    let mut out = data.mapv(|v| v - mean);
    let frob = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = data.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if frob <= 1e-9 * scale * len.sqrt() || frob == 0.0 {
        return Err(Error::DegenerateConstantInput);
    }
    out.mapv_inplace(|v| v / frob);
    Ok(out)
}

/// Channel-summed circular cross-correlation of two normalized spectra over
/// row shifts, computed by FFT along the row axis.
pub fn circular_corr(a: &NormalizedTing, b: &NormalizedTing) -> Result<CorrMap1d> {
    circular_row_corr(&a.data, &b.data)
}

/// [`circular_corr`] on raw `(channels, rows, cols)` arrays; also usable on
/// sinograms for the spectra-free pipeline variant.
pub fn circular_row_corr(a: &Array3<f64>, b: &Array3<f64>) -> Result<CorrMap1d> {
    check_same_shape(a, b)?;
    let sa = theta_spectrum(a);
    let sb = theta_spectrum(b);
    Ok(corr_from_spectra(&sa, &sb))
}

/// DFT along the row (theta) axis for every `(channel, column)` sequence.
/// Precomputed once per map entry to make batch correlation cheap.
pub fn theta_spectrum(data: &Array3<f64>) -> Array3<Complex64> {
    let shape = data.shape();
    let (channels, n_theta, n_cols) = (shape[0], shape[1], shape[2]);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n_theta);
    let mut out = Array3::from_elem((channels, n_theta, n_cols), Complex64::new(0.0, 0.0));
    let mut buf = vec![Complex64::new(0.0, 0.0); n_theta];
    for c in 0..channels {
        for m in 0..n_cols {
            for j in 0..n_theta {
                buf[j] = Complex64::new(data[[c, j, m]], 0.0);
            }
            fft.process(&mut buf);
            for j in 0..n_theta {
                out[[c, j, m]] = buf[j];
            }
        }
    }
    out
}

/// Correlation map from two precomputed row spectra: the cross-spectra are
/// summed over channels and columns first, so only one inverse FFT is needed
/// per pair.
pub fn corr_from_spectra(a: &Array3<Complex64>, b: &Array3<Complex64>) -> CorrMap1d {
    let shape = a.shape();
    let (channels, n_theta, n_cols) = (shape[0], shape[1], shape[2]);
    let mut acc = vec![Complex64::new(0.0, 0.0); n_theta];
    for c in 0..channels {
        for j in 0..n_theta {
            let mut s = Complex64::new(0.0, 0.0);
            for m in 0..n_cols {
                s += a[[c, j, m]] * b[[c, j, m]].conj();
            }
            acc[j] += s;
        }
    }
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(n_theta);
    ifft.process(&mut acc);
    let scale = 1.0 / n_theta as f64;
    CorrMap1d {
        values: acc.iter().map(|v| v.re * scale).collect(),
    }
}

/// Channel-summed circular 2D cross-correlation of two BEVs via 2D FFT.
/// Inputs are expected to be normalized with [`normalize_bev`] when peak
/// values are compared across pairs.
pub fn corr2d(a: &FeatureBev, b: &FeatureBev) -> Result<CorrMap2d> {
    corr2d_raw(&a.data, &b.data)
}

pub fn corr2d_raw(a: &Array3<f64>, b: &Array3<f64>) -> Result<CorrMap2d> {
    check_same_shape(a, b)?;
    let shape = a.shape();
    let (channels, h, w) = (shape[0], shape[1], shape[2]);
    let mut acc = Array2::from_elem((h, w), Complex64::new(0.0, 0.0));
    for c in 0..channels {
        let fa = fft2(&a.index_axis(ndarray::Axis(0), c).to_owned(), false);
        let fb = fft2(&b.index_axis(ndarray::Axis(0), c).to_owned(), false);
        for i in 0..h {
            for j in 0..w {
                acc[[i, j]] += fa[[i, j]] * fb[[i, j]].conj();
            }
        }
    }
    let inv = fft2c(&acc, true);
    let scale = 1.0 / (h * w) as f64;
    Ok(CorrMap2d {
        values: inv.mapv(|v| v.re * scale),
    })
}

fn fft2(real: &Array2<f64>, inverse: bool) -> Array2<Complex64> {
    fft2c(&real.mapv(|v| Complex64::new(v, 0.0)), inverse)
}

fn fft2c(grid: &Array2<Complex64>, inverse: bool) -> Array2<Complex64> {
    let (h, w) = grid.dim();
    let mut out = grid.clone();
    let mut planner = FftPlanner::new();
    let row_fft = if inverse {
        planner.plan_fft_inverse(w)
    } else {
        planner.plan_fft_forward(w)
    };
    for mut row in out.rows_mut() {
        let slice = row.as_slice_mut().expect("contiguous row");
        row_fft.process(slice);
    }
    let col_fft = if inverse {
        planner.plan_fft_inverse(h)
    } else {
        planner.plan_fft_forward(h)
    };
    let mut buf = vec![Complex64::new(0.0, 0.0); h];
    for j in 0..w {
        for i in 0..h {
            buf[i] = out[[i, j]];
        }
        col_fft.process(&mut buf);
        for i in 0..h {
            out[[i, j]] = buf[i];
        }
    }
    out
}

fn check_same_shape<T>(a: &Array3<T>, b: &Array3<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            a: a.shape().to_vec(),
            b: b.shape().to_vec(),
        });
    }
    Ok(())
}
