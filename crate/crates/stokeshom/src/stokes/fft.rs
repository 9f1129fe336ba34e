//! Thin fast-transform layer over rustfft: cached complex FFT plans plus the
//! real trigonometric transforms (DCT-II/III, DST-I/II/III) needed to
//! diagonalize constant-coefficient operators under periodic, Neumann, and
//! no-slip boundary conditions on the staggered grid.
//!
//! Scaling conventions are unnormalized sums; each inverse pair documents its
//! round-trip factor.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

pub struct FftCache {
    planner: FftPlanner<f64>,
    plans: HashMap<(usize, bool), Arc<dyn Fft<f64>>>,
    scratch: Vec<Complex<f64>>,
}

impl Default for FftCache {
    fn default() -> Self {
        FftCache { planner: FftPlanner::new(), plans: HashMap::new(), scratch: Vec::new() }
    }
}

impl FftCache {
    fn plan(&mut self, len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
        self.plans
            .entry((len, inverse))
            .or_insert_with(|| {
                if inverse {
                    self.planner.plan_fft_inverse(len)
                } else {
                    self.planner.plan_fft_forward(len)
                }
            })
            .clone()
    }

    /// In-place unnormalized FFT; `inverse` uses the e^{+i} kernel.
    pub fn fft(&mut self, data: &mut [Complex<f64>], inverse: bool) {
        let plan = self.plan(data.len(), inverse);
        self.scratch.resize(plan.get_inplace_scratch_len(), Complex::default());
        plan.process_with_scratch(data, &mut self.scratch);
    }
}

/// DCT-II: X_k = sum_j x_j cos(pi k (j + 1/2) / N).
pub fn dct2(cache: &mut FftCache, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut v = vec![Complex::new(0.0, 0.0); 2 * n];
    for (j, &xj) in x.iter().enumerate() {
        v[j] = Complex::new(xj, 0.0);
        v[2 * n - 1 - j] = Complex::new(xj, 0.0);
    }
    cache.fft(&mut v, false);
    (0..n)
        .map(|k| {
            let ph = Complex::from_polar(1.0, -PI * k as f64 / (2.0 * n as f64));
            0.5 * (ph * v[k]).re
        })
        .collect()
}

/// DCT-III: x_j = X_0/2 + sum_{k>=1} X_k cos(pi k (j + 1/2) / N).
/// Round trip: dct3(dct2(x)) = (N/2) x.
pub fn dct3(cache: &mut FftCache, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut v = vec![Complex::new(0.0, 0.0); 2 * n];
    for (k, &xk) in x.iter().enumerate() {
        let c = if k == 0 { 0.5 * xk } else { xk };
        v[k] = Complex::from_polar(1.0, PI * k as f64 / (2.0 * n as f64)) * c;
    }
    cache.fft(&mut v, true);
    (0..n).map(|j| v[j].re).collect()
}

/// DST-I: X_k = sum_j x_j sin(pi (j+1)(k+1) / (M+1)) for a length-M signal.
/// Self-inverse with round trip ((M+1)/2) x.
pub fn dst1(cache: &mut FftCache, x: &[f64]) -> Vec<f64> {
    let m = x.len();
    let len = 2 * (m + 1);
    let mut v = vec![Complex::new(0.0, 0.0); len];
    for (j, &xj) in x.iter().enumerate() {
        v[j + 1] = Complex::new(xj, 0.0);
        v[len - 1 - j] = Complex::new(-xj, 0.0);
    }
    cache.fft(&mut v, false);
    // V_k = -2i sum_j x_j sin(2 pi (j+1) k / len)
    (0..m).map(|k| -0.5 * v[k + 1].im).collect()
}

/// DST-II: X_k = sum_j x_j sin(pi (k+1)(j + 1/2) / N).
pub fn dst2(cache: &mut FftCache, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut v = vec![Complex::new(0.0, 0.0); 2 * n];
    for (j, &xj) in x.iter().enumerate() {
        v[j] = Complex::new(xj, 0.0);
    }
    cache.fft(&mut v, true); // e^{+i} kernel
    (0..n)
        .map(|k| {
            let m = (k + 1) as f64;
            let ph = Complex::from_polar(1.0, PI * m / (2.0 * n as f64));
            (ph * v[k + 1]).im
        })
        .collect()
}

/// DST-III: x_j = sum_{k<N-1} X_k sin(pi (k+1)(j+1/2)/N) + (X_{N-1}/2)(-1)^j.
/// Round trip: dst3(dst2(x)) = (N/2) x.
pub fn dst3(cache: &mut FftCache, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut v = vec![Complex::new(0.0, 0.0); 2 * n];
    for (k, &xk) in x.iter().enumerate() {
        let c = if k == n - 1 { 0.5 * xk } else { xk };
        let m = (k + 1) as f64;
        v[k + 1] = Complex::from_polar(1.0, PI * m / (2.0 * n as f64)) * c;
    }
    cache.fft(&mut v, true);
    (0..n).map(|j| v[j].im).collect()
}

/// Kind of 1D real transform to run along an axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RealTransform {
    Dct2,
    Dct3,
    Dst1,
    Dst2,
    Dst3,
}

pub fn real_transform(cache: &mut FftCache, kind: RealTransform, x: &[f64]) -> Vec<f64> {
    match kind {
        RealTransform::Dct2 => dct2(cache, x),
        RealTransform::Dct3 => dct3(cache, x),
        RealTransform::Dst1 => dst1(cache, x),
        RealTransform::Dst2 => dst2(cache, x),
        RealTransform::Dst3 => dst3(cache, x),
    }
}

/// Apply a 1D real transform along `axis` of a row-major array with extents
/// `dims` (x fastest).
pub fn transform_axis(
    cache: &mut FftCache,
    data: &mut [f64],
    dims: [usize; 3],
    axis: usize,
    kind: RealTransform,
) {
    let stride: usize = dims[..axis].iter().product();
    let count = dims[axis];
    let outer: usize = dims[axis + 1..].iter().product();
    let mut line = vec![0.0; count];
    for o in 0..outer {
        for inner in 0..stride {
            let base = o * stride * count + inner;
            for (k, v) in line.iter_mut().enumerate() {
                *v = data[base + k * stride];
            }
            let out = real_transform(cache, kind, &line);
            for (k, v) in out.iter().enumerate() {
                data[base + k * stride] = *v;
            }
        }
    }
}

/// Complex FFT along every axis of a real row-major array; returns the
/// complex spectrum.
pub fn fft_nd(cache: &mut FftCache, data: &[f64], dims: [usize; 3], ndim: usize) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = data.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft_nd_complex(cache, &mut buf, dims, ndim, false);
    buf
}

/// In-place complex FFT along the first `ndim` axes.
pub fn fft_nd_complex(
    cache: &mut FftCache,
    buf: &mut [Complex<f64>],
    dims: [usize; 3],
    ndim: usize,
    inverse: bool,
) {
    for axis in 0..ndim {
        let stride: usize = dims[..axis].iter().product();
        let count = dims[axis];
        let outer: usize = dims[axis + 1..].iter().product();
        let mut line = vec![Complex::new(0.0, 0.0); count];
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * stride * count + inner;
                for (k, v) in line.iter_mut().enumerate() {
                    *v = buf[base + k * stride];
                }
                cache.fft(&mut line, inverse);
                for (k, v) in line.iter().enumerate() {
                    buf[base + k * stride] = *v;
                }
            }
        }
    }
}

/// Inverse of `fft_nd` including the 1/N^d normalization; returns real parts.
pub fn ifft_nd(
    cache: &mut FftCache,
    buf: &mut [Complex<f64>],
    dims: [usize; 3],
    ndim: usize,
) -> Vec<f64> {
    fft_nd_complex(cache, buf, dims, ndim, true);
    let norm: usize = dims[..ndim].iter().product();
    buf.iter().map(|c| c.re / norm as f64).collect()
}
