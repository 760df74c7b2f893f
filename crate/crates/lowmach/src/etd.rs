//! phi-functions for exponential time differencing.
//!
//! phi1(z) = (e^z - 1)/z and phi2(z) = (e^z - 1 - z)/z^2 appear in the
//! ETDRK2 update; both are entire, and both are computed here in scalar and
//! small-matrix form. The matrix form goes through the augmented-block
//! identity
//!
//!   exp [[A, I, 0], [0, 0, I], [0, 0, 0]]  has top block row
//!   [e^A, phi1(A), phi2(A)],
//!
//! so one Pade exponential yields the whole table with uniform accuracy -
//! no separate small-|z| branches to get wrong per entry.

use crate::linalg::{expm, MatC};
use num_complex::Complex64;

/// (e^z, phi1(z), phi2(z)). Below |z| = 0.35 the subtracted forms lose
/// digits, so phi2 comes from its Taylor series and the other two from the
/// exact recurrences phi1 = 1 + z phi2, e^z = 1 + z phi1; above, the direct
/// formulas are well conditioned.
pub fn phi_scalar(z: Complex64) -> (Complex64, Complex64, Complex64) {
    let one = Complex64::new(1.0, 0.0);
    if z.norm() < 0.35 {
        // sum_{k>=0} z^k / (k+2)!; 16 terms put the remainder near 1e-26
        let mut term = Complex64::new(0.5, 0.0);
        let mut acc = term;
        for k in 1..16 {
            term = term * z / (k as f64 + 2.0);
            acc += term;
        }
        let phi2 = acc;
        let phi1 = one + z * phi2;
        let e = one + z * phi1;
        (e, phi1, phi2)
    } else {
        let e = z.exp();
        let phi1 = (e - one) / z;
        let phi2 = (phi1 - one) / z;
        (e, phi1, phi2)
    }
}

/// (e^A, phi1(A), phi2(A)) for a small square matrix, via the augmented
/// exponential.
pub fn phi_block(a: &MatC) -> (MatC, MatC, MatC) {
    let m = a.n;
    let mut aug = MatC::zeros(3 * m);
    for i in 0..m {
        for j in 0..m {
            aug[(i, j)] = a[(i, j)];
        }
        aug[(i, m + i)] = Complex64::new(1.0, 0.0);
        aug[(m + i, 2 * m + i)] = Complex64::new(1.0, 0.0);
    }
    let e = expm(&aug);
    let mut out = (MatC::zeros(m), MatC::zeros(m), MatC::zeros(m));
    for i in 0..m {
        for j in 0..m {
            out.0[(i, j)] = e[(i, j)];
            out.1[(i, j)] = e[(i, m + j)];
            out.2[(i, j)] = e[(i, 2 * m + j)];
        }
    }
    out
}

/// Step-size ladder for the adaptive controller: h = h_max / 2^level, so
/// repeated steps reuse cached per-mode tables instead of rebuilding them
/// for every slightly-different h.
#[derive(Clone, Copy, Debug)]
pub struct HLadder {
    pub h_max: f64,
    pub level: u32,
}

impl HLadder {
    pub fn h(&self) -> f64 {
        self.h_max / (1u64 << self.level) as f64
    }

    /// err_scaled = (error estimate)/(tolerance); > 1 rejects the step.
    /// Growth is deliberately sticky: only a comfortably small error climbs
    /// back up the ladder.
    pub fn adapt(&mut self, err_scaled: f64) -> bool {
        if err_scaled > 1.0 {
            assert!(self.level < 48, "step size collapsed: h = {:.3e}", self.h());
            self.level += 1;
            false
        } else {
            if err_scaled < 0.12 && self.level > 0 {
                self.level -= 1;
            }
            true
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn scalar_series_and_direct_formulas_overlap() {
        // |z| in [0.2, 0.5] straddles the branch point at 0.35; force both
        // branches to evaluate the same points and agree
        for &r in &[0.2, 0.3, 0.34, 0.36, 0.5] {
            for k in 0..12 {
                let th = k as f64 * 0.5236;
                let z = Complex64::from_polar(r, th);
                let series = {
                    let mut term = c(0.5, 0.0);
                    let mut acc = term;
                    for k in 1..20 {
                        term = term * z / (k as f64 + 2.0);
                        acc += term;
                    }
                    acc
                };
                // the direct form carries ~|z|^{-1} cancellation here; that
                // is exactly why the production branch point sits at 0.35
                let direct = ((z.exp() - 1.0) / z - 1.0) / z;
                assert!((series - direct).norm() < 1e-14);
                let (_, _, phi2) = phi_scalar(z);
                assert!((phi2 - series).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn scalar_recurrences_hold_everywhere() {
        for &re in &[-40.0, -3.0, -0.1, 0.0, 0.2, 2.0] {
            for &im in &[0.0, 0.01, 1.0, 6.28, 50.0] {
                let z = c(re, im);
                let (e, p1, p2) = phi_scalar(z);
                assert!((e - (c(1.0, 0.0) + z * p1)).norm() < 1e-13 * e.norm().max(1.0));
                assert!((p1 - (c(1.0, 0.0) + z * p2)).norm() < 1e-13);
                if z.norm() > 0.0 {
                    assert!((e - z.exp()).norm() < 1e-13 * e.norm().max(1.0));
                }
            }
        }
        let (e0, p10, p20) = phi_scalar(c(0.0, 0.0));
        assert_eq!(e0, c(1.0, 0.0));
        assert_eq!(p10, c(1.0, 0.0));
        assert_eq!(p20, c(0.5, 0.0));
    }

    #[test]
    fn block_tables_reduce_to_scalars_on_diagonal_matrices() {
        let z1 = c(-2.0, 30.0);
        let z2 = c(-0.001, 0.0);
        let mut a = MatC::zeros(2);
        a[(0, 0)] = z1;
        a[(1, 1)] = z2;
        let (e, p1, p2) = phi_block(&a);
        for (i, z) in [z1, z2].iter().enumerate() {
            let (se, sp1, sp2) = phi_scalar(*z);
            assert!((e[(i, i)] - se).norm() < 1e-13);
            assert!((p1[(i, i)] - sp1).norm() < 1e-13);
            assert!((p2[(i, i)] - sp2).norm() < 1e-13);
        }
        assert!(e[(0, 1)].norm() < 1e-15);
        assert!(p2[(1, 0)].norm() < 1e-15);
    }

    #[test]
    fn block_tables_satisfy_matrix_recurrences() {
        // random stiff-ish 2x2: A phi1(A) = e^A - I and phi1 = I + A phi2
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let mut a = MatC::zeros(2);
            for x in a.a.iter_mut() {
                *x = c(rng.gen_range(-20.0..2.0), rng.gen_range(-30.0..30.0));
            }
            let (e, p1, p2) = phi_block(&a);
            let mut lhs = a.matmul(&p1);
            lhs.add_scaled(c(1.0, 0.0), &MatC::eye(2));
            assert!(lhs.max_diff(&e) < 1e-11 * e.one_norm().max(1.0));
            let mut rhs = a.matmul(&p2);
            rhs.add_scaled(c(1.0, 0.0), &MatC::eye(2));
            assert!(rhs.max_diff(&p1) < 1e-12 * p1.one_norm().max(1.0));
        }
    }

    #[test]
    fn block_phi_matches_taylor_series_at_small_norm() {
        // independent of the Pade route: plain series, valid since |A| < 1/2
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let mut a = MatC::zeros(2);
        for x in a.a.iter_mut() {
            *x = c(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2));
        }
        let (_, _, p2) = phi_block(&a);
        let mut term = MatC::eye(2);
        term.scale(c(0.5, 0.0));
        let mut acc = term.clone();
        for k in 1..25 {
            term = term.matmul(&a);
            term.scale(c(1.0 / (k as f64 + 2.0), 0.0));
            acc.add_scaled(c(1.0, 0.0), &term);
        }
        assert!(p2.max_diff(&acc) < 1e-15);
    }

    #[test]
    fn ladder_halves_on_reject_and_climbs_cautiously() {
        let mut l = HLadder { h_max: 0.8, level: 0 };
        assert_eq!(l.h(), 0.8);
        assert!(!l.adapt(3.0)); // reject
        assert_eq!(l.h(), 0.4);
        assert!(l.adapt(0.5)); // accept, no growth
        assert_eq!(l.h(), 0.4);
        assert!(l.adapt(0.05)); // accept, grow
        assert_eq!(l.h(), 0.8);
        assert!(l.adapt(0.05)); // cannot grow past h_max
        assert_eq!(l.h(), 0.8);
    }
}
