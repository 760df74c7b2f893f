//! Small dense complex matrices and their exponential.
//!
//! The exponential is Pade-13 scaling-and-squaring, used both as the
//! referee for the closed-form acoustic propagator and as the builder of
//! the integrator's phi-tables; the two clients never validate against the
//! same code they run.

use num_complex::Complex64;

/// Dense square complex matrix, row-major, small (the crate uses 2, 4, 6).
#[derive(Clone, Debug)]
pub struct MatC {
    pub n: usize,
    pub a: Vec<Complex64>,
}

impl MatC {
    pub fn zeros(n: usize) -> MatC {
        MatC {
            n,
            a: vec![Complex64::default(); n * n],
        }
    }

    pub fn eye(n: usize) -> MatC {
        let mut m = MatC::zeros(n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[&[Complex64]]) -> MatC {
        let n = rows.len();
        let mut m = MatC::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n);
            m.a[i * n..(i + 1) * n].copy_from_slice(r);
        }
        m
    }

    pub fn matmul(&self, other: &MatC) -> MatC {
        let n = self.n;
        assert_eq!(other.n, n);
        let mut out = MatC::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self[(i, k)];
                if aik == Complex64::default() {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += aik * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn add_scaled(&mut self, c: Complex64, other: &MatC) {
        for (x, y) in self.a.iter_mut().zip(&other.a) {
            *x += c * y;
        }
    }

    pub fn scale(&mut self, c: Complex64) {
        for x in self.a.iter_mut() {
            *x *= c;
        }
    }

    pub fn one_norm(&self) -> f64 {
        let n = self.n;
        (0..n)
            .map(|j| (0..n).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_diff(&self, other: &MatC) -> f64 {
        self.a
            .iter()
            .zip(&other.a)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    /// Solve self * X = B in place of B (Gaussian elimination, partial
    /// pivoting). Consumes a copy of self.
    pub fn solve(&self, b: &MatC) -> MatC {
        let n = self.n;
        let mut lu = self.clone();
        let mut x = b.clone();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| {
                    lu[(i, col)]
                        .norm()
                        .partial_cmp(&lu[(j, col)].norm())
                        .unwrap()
                })
                .unwrap();
            if piv != col {
                for j in 0..n {
                    lu.a.swap(col * n + j, piv * n + j);
                    x.a.swap(col * n + j, piv * n + j);
                }
            }
            let d = lu[(col, col)];
            assert!(d.norm() > 0.0, "singular matrix in solve");
            for i in col + 1..n {
                let f = lu[(i, col)] / d;
                if f == Complex64::default() {
                    continue;
                }
                for j in col..n {
                    let v = lu[(col, j)];
                    lu[(i, j)] -= f * v;
                }
                for j in 0..n {
                    let v = x[(col, j)];
                    x[(i, j)] -= f * v;
                }
            }
        }
        for col in (0..n).rev() {
            let d = lu[(col, col)];
            for j in 0..n {
                x[(col, j)] /= d;
            }
            for i in 0..col {
                let f = lu[(i, col)];
                for j in 0..n {
                    let v = x[(col, j)];
                    x[(i, j)] -= f * v;
                }
            }
        }
        x
    }
}

impl std::ops::Index<(usize, usize)> for MatC {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.a[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for MatC {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.a[i * self.n + j]
    }
}

/// Pade-13 coefficients (numerator of the [13/13] approximant to exp).
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Matrix exponential by scaling-and-squaring with the [13/13] Pade
/// approximant. Always uses the full order; for the tiny matrices here the
/// extra work is irrelevant and the branch-free version is easier to trust.
pub fn expm(m: &MatC) -> MatC {
    const THETA13: f64 = 5.371920351148152;
    let norm = m.one_norm();
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let mut a = m.clone();
    a.scale(Complex64::new((0.5f64).powi(s), 0.0));

    let n = a.n;
    let id = MatC::eye(n);
    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a2.matmul(&a4);

    let c = |k: usize| Complex64::new(PADE13[k], 0.0);

    // U = A (A6 (b13 A6 + b11 A4 + b9 A2) + b7 A6 + b5 A4 + b3 A2 + b1 I)
    let mut inner = MatC::zeros(n);
    inner.add_scaled(c(13), &a6);
    inner.add_scaled(c(11), &a4);
    inner.add_scaled(c(9), &a2);
    let mut u = a6.matmul(&inner);
    u.add_scaled(c(7), &a6);
    u.add_scaled(c(5), &a4);
    u.add_scaled(c(3), &a2);
    u.add_scaled(c(1), &id);
    let u = a.matmul(&u);

    // V = A6 (b12 A6 + b10 A4 + b8 A2) + b6 A6 + b4 A4 + b2 A2 + b0 I
    let mut inner = MatC::zeros(n);
    inner.add_scaled(c(12), &a6);
    inner.add_scaled(c(10), &a4);
    inner.add_scaled(c(8), &a2);
    let mut v = a6.matmul(&inner);
    v.add_scaled(c(6), &a6);
    v.add_scaled(c(4), &a4);
    v.add_scaled(c(2), &a2);
    v.add_scaled(c(0), &id);

    // (V - U) X = (V + U)
    let mut vmu = v.clone();
    vmu.add_scaled(Complex64::new(-1.0, 0.0), &u);
    let mut vpu = v;
    vpu.add_scaled(Complex64::new(1.0, 0.0), &u);
    let mut x = vmu.solve(&vpu);
    for _ in 0..s {
        x = x.matmul(&x);
    }
    x
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
    fn expm_diagonal_is_entrywise_exp() {
        let mut m = MatC::zeros(3);
        m[(0, 0)] = c(1.0, 0.0);
        m[(1, 1)] = c(-2.0, 3.0);
        m[(2, 2)] = c(0.0, -1.5);
        let e = expm(&m);
        for i in 0..3 {
            let want = m[(i, i)].exp();
            assert!((e[(i, i)] - want).norm() < 1e-14);
        }
        assert!(e[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn expm_nilpotent_truncates() {
        let m = MatC::from_rows(&[&[c(0.0, 0.0), c(1.0, 0.0)], &[c(0.0, 0.0), c(0.0, 0.0)]]);
        let e = expm(&m);
        assert!((e[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((e[(0, 1)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((e[(1, 0)]).norm() < 1e-15);
    }

    #[test]
    fn expm_generator_of_rotation() {
        let th = 1.3;
        let m = MatC::from_rows(&[&[c(0.0, 0.0), c(-th, 0.0)], &[c(th, 0.0), c(0.0, 0.0)]]);
        let e = expm(&m);
        assert!((e[(0, 0)].re - th.cos()).abs() < 1e-14);
        assert!((e[(1, 0)].re - th.sin()).abs() < 1e-14);
    }

    #[test]
    fn expm_semigroup_property_under_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut m = MatC::zeros(4);
        for x in m.a.iter_mut() {
            *x = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        }
        let e1 = expm(&m);
        let mut m2 = m.clone();
        m2.scale(c(2.0, 0.0));
        let e2 = expm(&m2);
        let e1e1 = e1.matmul(&e1);
        assert!(e2.max_diff(&e1e1) < 1e-12 * e2.one_norm().max(1.0));
    }
}
