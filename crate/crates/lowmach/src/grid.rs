//! Uniform periodic grid on the 3-torus [0, L)^3 and its Fourier modes.
//!
//! Coefficients are stored in standard FFT order: axis index i in [0, n)
//! carries the integer wavenumber k = i for i < n/2 and k = i - n otherwise,
//! so xi = 2*pi*k/L. The flat index is (iz*n + iy)*n + ix with x fastest.
//! Fields represent real data; generators keep conjugate symmetry and stay
//! off the axis Nyquist planes k = -n/2 (which a real field cannot populate
//! symmetrically and the 2/3 dealias mask removes anyway).

use crate::error::{LabError, Result};
use crate::fft::Fft3;
use std::sync::Arc;

#[derive(Clone)]
pub struct Grid {
    n: usize,
    len: f64,
    fft: Arc<Fft3>,
    /// 2*pi/L times the signed integer wavenumber, per axis index.
    xi_axis: Vec<f64>,
}

impl Grid {
    /// n must be even and at least 8; L positive. FFT plans are built once
    /// here and shared by clones.
    pub fn new(n: usize, len: f64) -> Result<Grid> {
        if n < 8 || n % 2 != 0 {
            return Err(LabError::config(format!(
                "grid size must be even and >= 8, got {n}"
            )));
        }
        if !(len > 0.0) || !len.is_finite() {
            return Err(LabError::config(format!("box length must be positive, got {len}")));
        }
        let base = 2.0 * std::f64::consts::PI / len;
        let xi_axis = (0..n).map(|i| base * signed_index(i, n) as f64).collect();
        Ok(Grid {
            n,
            len,
            fft: Arc::new(Fft3::new(n)),
            xi_axis,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> f64 {
        self.len
    }

    pub fn fft(&self) -> &Fft3 {
        &self.fft
    }

    /// Number of modes (= physical points) per component.
    pub fn mode_count(&self) -> usize {
        self.n * self.n * self.n
    }

    /// Grid spacing L/n.
    pub fn dx(&self) -> f64 {
        self.len / self.n as f64
    }

    /// Quadrature weight (L/n)^3 of the rectangle rule.
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(3)
    }

    /// Smallest nonzero |xi| = 2*pi/L.
    pub fn xi_min(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.len
    }

    /// |xi| at the corner of the mode cube, the largest resolved wavenumber.
    pub fn xi_max(&self) -> f64 {
        self.xi_min() * (self.n as f64 / 2.0) * 3f64.sqrt()
    }

    #[inline]
    pub fn decompose(&self, idx: usize) -> (usize, usize, usize) {
        let ix = idx % self.n;
        let iy = (idx / self.n) % self.n;
        let iz = idx / (self.n * self.n);
        (ix, iy, iz)
    }

    #[inline]
    pub fn xi(&self, idx: usize) -> [f64; 3] {
        let (ix, iy, iz) = self.decompose(idx);
        [self.xi_axis[ix], self.xi_axis[iy], self.xi_axis[iz]]
    }

    #[inline]
    pub fn xi_norm_sq(&self, idx: usize) -> f64 {
        let [a, b, c] = self.xi(idx);
        a * a + b * b + c * c
    }

    #[inline]
    pub fn xi_norm(&self, idx: usize) -> f64 {
        self.xi_norm_sq(idx).sqrt()
    }

    /// True for modes removed by the 2/3 rule: any axis with 3|k| >= n.
    /// The inequality must be strict in K = max kept |k| (n - 2K > K),
    /// otherwise for 3 | n the wrapped image of a product mode lands exactly
    /// on the boundary mode instead of beyond it.
    #[inline]
    pub fn aliased(&self, idx: usize) -> bool {
        let (ix, iy, iz) = self.decompose(idx);
        [ix, iy, iz]
            .iter()
            .any(|&i| 3 * signed_index(i, self.n).unsigned_abs() as usize >= self.n)
    }

    /// Largest |xi| kept by the dealias mask (per axis).
    pub fn xi_dealias(&self) -> f64 {
        self.xi_min() * ((self.n - 1) / 3) as f64
    }
}

#[inline]
pub fn signed_index(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenumbers_follow_fft_order() {
        let g = Grid::new(8, 2.0 * std::f64::consts::PI).unwrap();
        // base spacing is 1 for L = 2*pi
        let ks: Vec<f64> = (0..8).map(|i| g.xi(i)[0]).collect();
        assert_eq!(ks, vec![0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid::new(7, 1.0).is_err());
        assert!(Grid::new(6, 1.0).is_err());
        assert!(Grid::new(8, -1.0).is_err());
    }

    #[test]
    fn dealias_mask_cuts_strictly_below_third() {
        // 3 | 12: keeping |k| = 4 would let e^{i4x} * e^{i4x} wrap onto the
        // kept mode -4, so the boundary must go too.
        let g = Grid::new(12, 1.0).unwrap();
        assert!(!g.aliased(3));
        assert!(g.aliased(4));
        assert!(g.aliased(6)); // k = -6
        assert!(g.aliased(12 - 4)); // k = -4
        // 16 = 3*5 + 1: |k| = 5 survives
        let g = Grid::new(16, 1.0).unwrap();
        assert!(!g.aliased(5));
        assert!(g.aliased(6));
    }
}
