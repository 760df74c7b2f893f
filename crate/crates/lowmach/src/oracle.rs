//! Slow reference transforms used only in tests and acceptance checks.
//!
//! Everything here trades speed for independence: literal O(n^6) DFT sums
//! and a true unwrapped convolution. No fast path in the crate shares code
//! with this module, so agreement is evidence rather than tautology.

use crate::grid::{signed_index, Grid};
use num_complex::Complex64;

/// Literal forward DFT: u_hat(k) = n^{-3} sum_m u(m) e^{-2 pi i k.m / n}.
pub fn dft3_direct(grid: &Grid, values: &[Complex64]) -> Vec<Complex64> {
    let n = grid.n();
    let n3 = grid.mode_count();
    assert_eq!(values.len(), n3);
    let mut out = vec![Complex64::default(); n3];
    for idx in 0..n3 {
        let (kx, ky, kz) = grid.decompose(idx);
        let mut acc = Complex64::default();
        for m in 0..n3 {
            let (mx, my, mz) = grid.decompose(m);
            let phase = -2.0 * std::f64::consts::PI * (kx * mx + ky * my + kz * mz) as f64
                / n as f64;
            acc += values[m] * Complex64::from_polar(1.0, phase);
        }
        out[idx] = acc / n3 as f64;
    }
    out
}

/// True (unwrapped) convolution of coefficient arrays: out(k) =
/// sum_m a(k - m) b(m), with k - m read as an exact integer triple and
/// treated as zero when it falls outside the representable band. Against
/// this, a pseudospectral product shows its aliasing error directly.
pub fn convolve_direct(grid: &Grid, a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let n = grid.n() as i64;
    let n3 = grid.mode_count();
    let lookup = |arr: &[Complex64], k: [i64; 3]| -> Complex64 {
        for &c in &k {
            if c < -n / 2 || c >= n / 2 {
                return Complex64::default();
            }
        }
        let wrap = |c: i64| if c < 0 { (c + n) as usize } else { c as usize };
        arr[(wrap(k[2]) * n as usize + wrap(k[1])) * n as usize + wrap(k[0])]
    };
    let mut out = vec![Complex64::default(); n3];
    for idx in 0..n3 {
        let (kx, ky, kz) = grid.decompose(idx);
        let k = [
            signed_index(kx, n as usize),
            signed_index(ky, n as usize),
            signed_index(kz, n as usize),
        ];
        let mut acc = Complex64::default();
        for m in 0..n3 {
            let (mx, my, mz) = grid.decompose(m);
            let mm = [
                signed_index(mx, n as usize),
                signed_index(my, n as usize),
                signed_index(mz, n as usize),
            ];
            let bm = b[m];
            if bm == Complex64::default() {
                continue;
            }
            acc += lookup(a, [k[0] - mm[0], k[1] - mm[1], k[2] - mm[2]]) * bm;
        }
        out[idx] = acc;
    }
    out
}
