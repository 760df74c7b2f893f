//! Dyadic (Littlewood-Paley) filter bank on the grid.
//!
//! The bank uses a squared partition: the block-j multiplier is
//! m_j(xi) = chi(2^{-j-1} xi) - chi(2^{-j} xi) where chi is a radial bump
//! equal to 1 inside |xi| <= 3/4 and 0 outside |xi| >= 4/3. The multipliers
//! telescope, so sum_j m_j(xi) = 1 exactly (to rounding) on every nonzero
//! grid mode once the j-range brackets the resolved annulus. m_j is
//! supported on 3/4 <= 2^{-j}|xi| <= 8/3, hence blocks j and j' interact
//! only for |j - j'| <= 1.

use crate::field::SpectralField;
use crate::grid::Grid;
use rayon::prelude::*;

/// exp(-1/t) ramp, the standard smooth step ingredient.
fn ramp(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Radial cutoff: 1 on [0, 3/4], 0 on [4/3, inf), smooth and nonincreasing.
pub fn chi(rho: f64) -> f64 {
    const LO: f64 = 0.75;
    const HI: f64 = 4.0 / 3.0;
    if rho <= LO {
        1.0
    } else if rho >= HI {
        0.0
    } else {
        let t = (rho - LO) / (HI - LO);
        let up = ramp(t);
        let down = ramp(1.0 - t);
        down / (down + up)
    }
}

/// Block profile m(rho) = chi(rho/2) - chi(rho), in [0,1], supported on
/// [3/4, 8/3].
pub fn block_profile(rho: f64) -> f64 {
    chi(rho / 2.0) - chi(rho)
}

pub struct DyadicFilterBank {
    grid: Grid,
    j_lo: i32,
    j_hi: i32,
    /// m_j(xi) tables, indexed by j - j_lo, each of length n^3.
    blocks: Vec<Vec<f64>>,
}

impl DyadicFilterBank {
    pub fn new(grid: &Grid) -> DyadicFilterBank {
        let xi_min = grid.xi_min();
        let xi_max = grid.xi_max();
        // chi(2^{-j_lo} xi) = 0 on all nonzero modes; chi(2^{-j_hi-1} xi) = 1
        // everywhere. Both bounds leave one fully-contained block of slack.
        let j_lo = (xi_min * 3.0 / 4.0).log2().floor() as i32;
        let j_hi = (xi_max * 4.0 / 3.0).log2().ceil() as i32;
        let blocks = (j_lo..=j_hi)
            .map(|j| {
                let scale = (2.0f64).powi(-j);
                (0..grid.mode_count())
                    .into_par_iter()
                    .map(|i| block_profile(scale * grid.xi_norm(i)))
                    .collect()
            })
            .collect();
        DyadicFilterBank {
            grid: grid.clone(),
            j_lo,
            j_hi,
            blocks,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn j_min(&self) -> i32 {
        self.j_lo
    }

    pub fn j_max(&self) -> i32 {
        self.j_hi
    }

    pub fn block_table(&self, j: i32) -> &[f64] {
        &self.blocks[(j - self.j_lo) as usize]
    }

    /// Delta_j u: multiply every component by the block-j table.
    pub fn dyadic_block(&self, f: &SpectralField, j: i32) -> SpectralField {
        let tbl = self.block_table(j);
        let n3 = self.grid.mode_count();
        let mut out = f.clone();
        out.coeffs_mut().par_chunks_mut(n3).for_each(|comp| {
            for (z, w) in comp.iter_mut().zip(tbl) {
                *z *= *w;
            }
        });
        out
    }

    /// S_j u: low-pass below the block scale, multiplier chi(2^{-j} xi).
    /// Equals the sum of blocks j' < j on the grid (and keeps the mean).
    pub fn low_cut(&self, f: &SpectralField, j: i32) -> SpectralField {
        let grid = self.grid.clone();
        let scale = (2.0f64).powi(-j);
        let n3 = grid.mode_count();
        let mut out = f.clone();
        out.coeffs_mut().par_chunks_mut(n3).for_each(|comp| {
            for (i, z) in comp.iter_mut().enumerate() {
                *z *= chi(scale * grid.xi_norm(i));
            }
        });
        out
    }
}
