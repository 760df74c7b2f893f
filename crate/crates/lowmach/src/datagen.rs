//! Deterministic test-data generators: random fields with prescribed
//! spectra, coherent packets, and the spectral delta.
//!
//! All randomness flows through seeded ChaCha streams and fields are filled
//! sequentially, so outputs are bit-identical across thread counts.

use crate::field::SpectralField;
use crate::grid::Grid;
use crate::paley::block_profile;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One RNG per logical stream; stream ids keep independent draws independent
/// when suites run per-epsilon jobs in parallel.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard normal via Box-Muller.
pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Enforce u_hat(-k) = conj(u_hat(k)) so physical values are real. Modes
/// that are their own negative (0 and n/2 axes) are projected onto their
/// real part.
pub fn symmetrize_real(f: &mut SpectralField) {
    let grid = f.grid().clone();
    let n = grid.n();
    let neg = |i: usize| (n - i) % n;
    for c in 0..f.components() {
        let comp = f.comp_mut(c);
        for idx in 0..comp.len() {
            let (ix, iy, iz) = grid.decompose(idx);
            let nidx = (neg(iz) * n + neg(iy)) * n + neg(ix);
            if idx < nidx {
                comp[nidx] = comp[idx].conj();
            } else if idx == nidx {
                comp[idx] = Complex64::new(comp[idx].re, 0.0);
            }
        }
    }
}

/// Real Gaussian field with per-mode standard deviation
/// |xi|^{-(s + 3/2)} restricted to the dyadic shells [j_lo, j_hi] (smooth
/// shell confinement through the filter-bank profile). The -(s + 3/2)
/// exponent makes the per-shell contribution 2^{js} ||Delta_j u||_{L^2}
/// flat in j, i.e. the field sits on the boundary of B^s_{2,inf}.
pub fn random_band_field(
    grid: &Grid,
    m: usize,
    j_range: (i32, i32),
    s: f64,
    rng: &mut ChaCha8Rng,
) -> SpectralField {
    let mut f = SpectralField::zeros(grid, m);
    let (j_lo, j_hi) = j_range;
    for c in 0..m {
        let comp = f.comp_mut(c);
        for idx in 0..comp.len() {
            let rho = grid.xi_norm(idx);
            // draw unconditionally: the draw count per mode must not depend
            // on the band, or seeds would not be comparable across bands
            let (re, im) = (gaussian(rng), gaussian(rng));
            if rho == 0.0 {
                continue;
            }
            let band: f64 = (j_lo..=j_hi)
                .map(|j| block_profile((2.0f64).powi(-j) * rho))
                .sum();
            if band == 0.0 {
                continue;
            }
            let std = band * rho.powf(-(s + 1.5));
            comp[idx] = Complex64::new(re * std, im * std);
        }
    }
    symmetrize_real(&mut f);
    f.dealias();
    f
}

/// The spectral delta: every coefficient 1. Its dyadic blocks are exactly
/// the convolution kernels K_j whose L^infty/L^1 sizes the dispersive
/// estimates bound.
pub fn spectral_delta(grid: &Grid) -> SpectralField {
    let mut f = SpectralField::zeros(grid, 1);
    for z in f.comp_mut(0).iter_mut() {
        *z = Complex64::new(1.0, 0.0);
    }
    f
}

/// Coherent radial packet on shell j: u_hat = block profile, constant zero
/// phase. Radially aligned phases concentrate the field at the origin -
/// the configuration that saturates dispersive decay, which random-phase
/// data never does (unitary propagation preserves their moduli).
pub fn coherent_packet(grid: &Grid, j: i32) -> SpectralField {
    let mut f = SpectralField::zeros(grid, 1);
    let scale = (2.0f64).powi(-j);
    let comp = f.comp_mut(0);
    for idx in 0..comp.len() {
        let w = block_profile(scale * grid.xi_norm(idx));
        comp[idx] = Complex64::new(w, 0.0);
    }
    f.dealias();
    f
}

/// Scale the field to unit L^2 norm; returns the factor applied.
pub fn normalize_l2(f: &mut SpectralField) -> f64 {
    let n = f.l2_norm();
    assert!(n > 0.0, "cannot normalize the zero field");
    f.scale(1.0 / n);
    1.0 / n
}
