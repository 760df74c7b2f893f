//! Spectral fields: m-component arrays of Fourier coefficients.
//!
//! Norm conventions follow the rectangle rule on the grid: for values v on
//! the n^3 points, ||u||_{L^p} = ((L/n)^3 sum |v|^p)^{1/p}, and Parseval
//! gives ||u||_{L^2} = L^{3/2} * l2(coefficients). The L^{3/2} (= (L/n)^{3/2}
//! times n^{3/2}) factor is fixed once here and used consistently by every
//! norm in the crate.

use crate::error::{LabError, Result};
use crate::grid::Grid;
use num_complex::Complex64;
use rayon::prelude::*;

#[derive(Clone)]
pub struct SpectralField {
    grid: Grid,
    m: usize,
    /// Component-major: coefficients of component c at [c*n^3, (c+1)*n^3).
    coeff: Vec<Complex64>,
}

impl SpectralField {
    /// m is 1 (scalar), 3 (velocity) or 4 (density-velocity stack).
    pub fn zeros(grid: &Grid, m: usize) -> SpectralField {
        assert!(matches!(m, 1 | 3 | 4), "component count must be 1, 3 or 4");
        SpectralField {
            grid: grid.clone(),
            m,
            coeff: vec![Complex64::default(); m * grid.mode_count()],
        }
    }

    pub fn from_coeffs(grid: &Grid, m: usize, coeff: Vec<Complex64>) -> Result<SpectralField> {
        if coeff.len() != m * grid.mode_count() {
            return Err(LabError::config(format!(
                "coefficient buffer has {} entries, expected {}",
                coeff.len(),
                m * grid.mode_count()
            )));
        }
        assert!(matches!(m, 1 | 3 | 4));
        Ok(SpectralField {
            grid: grid.clone(),
            m,
            coeff,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> usize {
        self.m
    }

    pub fn comp(&self, c: usize) -> &[Complex64] {
        let n3 = self.grid.mode_count();
        &self.coeff[c * n3..(c + 1) * n3]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut [Complex64] {
        let n3 = self.grid.mode_count();
        &mut self.coeff[c * n3..(c + 1) * n3]
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeff
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeff
    }

    /// Physical values of one component (inverse transform of a copy).
    pub fn to_physical(&self, c: usize) -> Vec<Complex64> {
        let mut v = self.comp(c).to_vec();
        self.grid.fft().inverse(&mut v);
        v
    }

    /// Physical values of all components, component-major.
    pub fn to_physical_all(&self) -> Vec<Complex64> {
        let n3 = self.grid.mode_count();
        let mut out = self.coeff.clone();
        for c in 0..self.m {
            self.grid.fft().inverse(&mut out[c * n3..(c + 1) * n3]);
        }
        out
    }

    /// Build a field from physical values (forward transform), applying the
    /// 2/3 dealias mask. Every physical-space product re-enters spectral
    /// space through here.
    pub fn from_physical(grid: &Grid, m: usize, mut values: Vec<Complex64>) -> SpectralField {
        let n3 = grid.mode_count();
        assert_eq!(values.len(), m * n3);
        for c in 0..m {
            grid.fft().forward(&mut values[c * n3..(c + 1) * n3]);
        }
        let mut f = SpectralField {
            grid: grid.clone(),
            m,
            coeff: values,
        };
        f.dealias();
        f
    }

    /// Zero every mode the 2/3 rule removes.
    pub fn dealias(&mut self) {
        let grid = self.grid.clone();
        let n3 = grid.mode_count();
        self.coeff.par_chunks_mut(n3).for_each(|comp| {
            for (i, z) in comp.iter_mut().enumerate() {
                if grid.aliased(i) {
                    *z = Complex64::default();
                }
            }
        });
    }

    /// l2 of raw coefficients times L^{3/2}; equals the physical L^2
    /// quadrature norm by Parseval.
    pub fn l2_norm(&self) -> f64 {
        let sq: f64 = self
            .coeff
            .par_chunks(4096)
            .map(|ch| ch.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .collect::<Vec<_>>()
            .into_iter()
            .sum();
        self.grid.len().powf(1.5) * sq.sqrt()
    }

    /// Mean (zero-mode) of a component.
    pub fn mean(&self, c: usize) -> Complex64 {
        self.comp(c)[0]
    }

    pub fn scale(&mut self, a: f64) {
        self.coeff.par_iter_mut().for_each(|z| *z *= a);
    }

    /// self += a * other
    pub fn axpy(&mut self, a: f64, other: &SpectralField) {
        assert_eq!(self.m, other.m);
        self.coeff
            .par_iter_mut()
            .zip(other.coeff.par_iter())
            .for_each(|(z, w)| *z += a * w);
    }

    /// Largest coefficient magnitude difference against another field.
    pub fn max_coeff_diff(&self, other: &SpectralField) -> f64 {
        self.coeff
            .iter()
            .zip(&other.coeff)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Pointwise (physical-space) product of a scalar field with an m-component
/// field, dealiased on re-entry.
pub fn mul_scalar(a: &SpectralField, b: &SpectralField) -> SpectralField {
    assert_eq!(a.components(), 1);
    let grid = a.grid().clone();
    let n3 = grid.mode_count();
    let pa = a.to_physical(0);
    let mut vals = b.to_physical_all();
    vals.par_chunks_mut(n3).for_each(|comp| {
        for (v, s) in comp.iter_mut().zip(&pa) {
            *v *= s;
        }
    });
    SpectralField::from_physical(&grid, b.components(), vals)
}

/// Apply a real scalar map pointwise in physical space (for pressure-law
/// compositions). The input must represent a real field; the map sees the
/// real part and the tiny imaginary transform residue is dropped.
pub fn map_scalar<F>(a: &SpectralField, map: F) -> SpectralField
where
    F: Fn(f64) -> f64 + Sync,
{
    assert_eq!(a.components(), 1);
    let grid = a.grid().clone();
    let mut vals = a.to_physical(0);
    vals.par_iter_mut().for_each(|v| {
        *v = Complex64::new(map(v.re), 0.0);
    });
    SpectralField::from_physical(&grid, 1, vals)
}

/// Pointwise real binary map of two scalar fields (for differences of
/// compositions evaluated in one pass, where subtracting two separately
/// filtered fields would move the cancellation into spectral space).
pub fn map_scalar2<F>(a: &SpectralField, b: &SpectralField, map: F) -> SpectralField
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    assert_eq!(a.components(), 1);
    assert_eq!(b.components(), 1);
    let grid = a.grid().clone();
    let mut vals = a.to_physical(0);
    let bv = b.to_physical(0);
    vals.par_iter_mut().zip(bv.par_iter()).for_each(|(v, w)| {
        *v = Complex64::new(map(v.re, w.re), 0.0);
    });
    SpectralField::from_physical(&grid, 1, vals)
}

/// Rectangle-rule L^p norm of physical values (possibly several components:
/// the pointwise magnitude is the euclidean norm across components).
/// p = f64::INFINITY gives the sup norm.
pub fn phys_lp_norm(grid: &Grid, values: &[Complex64], m: usize, p: f64) -> f64 {
    let n3 = grid.mode_count();
    assert_eq!(values.len(), m * n3);
    let mag_sq = |i: usize| -> f64 { (0..m).map(|c| values[c * n3 + i].norm_sqr()).sum() };
    if p.is_infinite() {
        return (0..n3).map(mag_sq).fold(0.0f64, f64::max).sqrt();
    }
    assert!(p >= 1.0);
    let sum: f64 = (0..n3)
        .into_par_iter()
        .fold(|| 0.0f64, |acc, i| acc + mag_sq(i).powf(p / 2.0))
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    (grid.cell_volume() * sum).powf(1.0 / p)
}
