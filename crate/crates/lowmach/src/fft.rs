//! Three-dimensional complex FFT built from rustfft 1-D plans.
//!
//! Convention: `forward` maps physical values to Fourier coefficients and
//! includes the 1/n^3 factor, so u(x_m) = sum_k uhat_k exp(+i 2 pi k.m / n)
//! holds exactly; `inverse` is the plain unnormalized synthesis. This is the
//! analysis convention with exp(-i x.xi); multipliers act directly on the
//! stored coefficients.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub struct Fft3 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

impl Fft3 {
    pub fn new(n: usize) -> Fft3 {
        let mut planner = FftPlanner::new();
        Fft3 {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    /// Physical values -> coefficients (with the 1/n^3 normalization).
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, Direction::Forward);
        let scale = 1.0 / (self.n * self.n * self.n) as f64;
        data.par_iter_mut().for_each(|z| *z *= scale);
    }

    /// Coefficients -> physical values.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, Direction::Inverse);
    }

    fn transform(&self, data: &mut [Complex64], dir: Direction) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n, "buffer is one component of n^3 modes");
        let plan = match dir {
            Direction::Forward => &self.fwd,
            Direction::Inverse => &self.inv,
        };
        // x lines are contiguous
        Self::fft_lines(plan, data, n);
        // y pass: transpose x<->y within each z slab, fft, transpose back
        data.par_chunks_mut(n * n).for_each(|slab| {
            transpose_square(slab, n);
        });
        Self::fft_lines(plan, data, n);
        data.par_chunks_mut(n * n).for_each(|slab| {
            transpose_square(slab, n);
        });
        // z pass: full x<->z transpose, fft, transpose back
        let mut scratch = vec![Complex64::default(); data.len()];
        transpose_xz(data, &mut scratch, n);
        Self::fft_lines(plan, &mut scratch, n);
        transpose_xz(&scratch, data, n);
    }

    fn fft_lines(plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64], n: usize) {
        data.par_chunks_mut(n).for_each_init(
            || vec![Complex64::default(); plan.get_inplace_scratch_len()],
            |scratch, line| plan.process_with_scratch(line, scratch),
        );
    }
}

/// In-place transpose of an n x n complex matrix stored row-major.
fn transpose_square(m: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            m.swap(i * n + j, j * n + i);
        }
    }
}

/// dst[(ix*n + iy)*n + iz] = src[(iz*n + iy)*n + ix]
fn transpose_xz(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    dst.par_chunks_mut(n * n)
        .enumerate()
        .for_each(|(ix, plane)| {
            for iy in 0..n {
                let row = &mut plane[iy * n..(iy + 1) * n];
                for (iz, v) in row.iter_mut().enumerate() {
                    *v = src[(iz * n + iy) * n + ix];
                }
            }
        });
}
