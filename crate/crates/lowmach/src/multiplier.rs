//! Fourier multipliers and the exact vector calculus they induce.
//!
//! With the synthesis convention u(x) = sum_k u_hat(k) e^{i xi_k . x},
//! differentiation is multiplication by i xi, so everything here is exact on
//! the grid (no finite-difference error).

use crate::field::SpectralField;
use num_complex::Complex64;
use rayon::prelude::*;

/// Multiply every component of `f` by the scalar symbol `sym(xi)`.
pub fn apply_multiplier<F>(f: &mut SpectralField, sym: F)
where
    F: Fn([f64; 3]) -> Complex64 + Sync,
{
    let grid = f.grid().clone();
    let n3 = grid.mode_count();
    f.coeffs_mut().par_chunks_mut(n3).for_each(|comp| {
        for (i, z) in comp.iter_mut().enumerate() {
            *z *= sym(grid.xi(i));
        }
    });
}

/// grad of a scalar: (i xi_1, i xi_2, i xi_3) u_hat.
pub fn gradient(f: &SpectralField) -> SpectralField {
    assert_eq!(f.components(), 1);
    let grid = f.grid().clone();
    let mut out = SpectralField::zeros(&grid, 3);
    for c in 0..3 {
        let src = f.comp(0).to_vec();
        out.comp_mut(c)
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, z)| {
                *z = Complex64::new(0.0, grid.xi(i)[c]) * src[i];
            });
    }
    out
}

/// div of a vector: i xi . u_hat.
pub fn divergence(f: &SpectralField) -> SpectralField {
    assert_eq!(f.components(), 3);
    let grid = f.grid().clone();
    let mut out = SpectralField::zeros(&grid, 1);
    let (u, v, w) = (f.comp(0), f.comp(1), f.comp(2));
    out.comp_mut(0)
        .par_iter_mut()
        .enumerate()
        .for_each(|(i, z)| {
            let xi = grid.xi(i);
            *z = Complex64::new(0.0, 1.0) * (xi[0] * u[i] + xi[1] * v[i] + xi[2] * w[i]);
        });
    out
}

/// -|xi|^2 on every component.
pub fn laplacian(f: &mut SpectralField) {
    apply_multiplier(f, |xi| {
        Complex64::new(-(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]), 0.0)
    });
}

/// Inverse Laplacian with the zero mode annihilated (the only choice that
/// keeps the operator bounded on mean-free data).
pub fn inv_laplacian(f: &mut SpectralField) {
    apply_multiplier(f, |xi| {
        let s = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        if s == 0.0 {
            Complex64::default()
        } else {
            Complex64::new(-1.0 / s, 0.0)
        }
    });
}

/// Leray projection P onto divergence-free fields:
/// (P u)_hat = u_hat - xi (xi . u_hat)/|xi|^2. The mean mode is kept.
pub fn project_solenoidal(f: &SpectralField) -> SpectralField {
    helmholtz_split(f, true)
}

/// Q = I - P, the gradient part. The mean mode of Q u is zero.
pub fn project_gradient(f: &SpectralField) -> SpectralField {
    helmholtz_split(f, false)
}

/// div(u (x) v)_i = sum_j d_j (u_i v_j), the conservative convection term.
/// The nine pointwise products are formed in physical space and dealiased.
pub fn div_outer(u: &SpectralField, v: &SpectralField) -> SpectralField {
    assert_eq!(u.components(), 3);
    assert_eq!(v.components(), 3);
    let grid = u.grid().clone();
    let n3 = grid.mode_count();
    let pu = u.to_physical_all();
    let pv = v.to_physical_all();
    let mut out = SpectralField::zeros(&grid, 3);
    for i in 0..3 {
        let mut acc = vec![Complex64::default(); n3];
        for j in 0..3 {
            let prod: Vec<Complex64> = (0..n3)
                .map(|x| pu[i * n3 + x] * pv[j * n3 + x])
                .collect();
            let mut t = SpectralField::from_physical(&grid, 1, prod);
            apply_multiplier(&mut t, |xi| Complex64::new(0.0, xi[j]));
            for (a, b) in acc.iter_mut().zip(t.comp(0)) {
                *a += b;
            }
        }
        out.comp_mut(i).copy_from_slice(&acc);
    }
    out
}

/// (a . grad) b, the advective derivative: out_i = sum_j a_j d_j b_i.
pub fn advect(a: &SpectralField, b: &SpectralField) -> SpectralField {
    assert_eq!(a.components(), 3);
    let grid = a.grid().clone();
    let n3 = grid.mode_count();
    let pa = a.to_physical_all();
    let mut out = SpectralField::zeros(&grid, b.components());
    for i in 0..b.components() {
        let mut acc = vec![Complex64::default(); n3];
        for j in 0..3 {
            let mut djbi = SpectralField::zeros(&grid, 1);
            djbi.comp_mut(0).copy_from_slice(b.comp(i));
            apply_multiplier(&mut djbi, |xi| Complex64::new(0.0, xi[j]));
            let pd = djbi.to_physical(0);
            for (x, v) in acc.iter_mut().enumerate() {
                *v += pa[j * n3 + x] * pd[x];
            }
        }
        let t = SpectralField::from_physical(&grid, 1, acc);
        out.comp_mut(i).copy_from_slice(t.comp(0));
    }
    out
}

/// The viscous (Lame) operator mu Lap + lam grad div.
pub fn lame_operator(v: &SpectralField, mu: f64, lam: f64) -> SpectralField {
    assert_eq!(v.components(), 3);
    let mut out = v.clone();
    laplacian(&mut out);
    out.scale(mu);
    out.axpy(lam, &gradient(&divergence(v)));
    out
}

fn helmholtz_split(f: &SpectralField, solenoidal: bool) -> SpectralField {
    assert_eq!(f.components(), 3);
    let grid = f.grid().clone();
    let n3 = grid.mode_count();
    let mut out = SpectralField::zeros(&grid, 3);
    let src = f.coeffs();
    // one pass per mode, writing all three components
    let (c0, rest) = out.coeffs_mut().split_at_mut(n3);
    let (c1, c2) = rest.split_at_mut(n3);
    c0.par_iter_mut()
        .zip(c1.par_iter_mut())
        .zip(c2.par_iter_mut())
        .enumerate()
        .for_each(|(i, ((z0, z1), z2))| {
            let xi = grid.xi(i);
            let s = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
            let u = [src[i], src[n3 + i], src[2 * n3 + i]];
            if s == 0.0 {
                // no gradient content at the mean
                let keep = if solenoidal { u } else { [Complex64::default(); 3] };
                *z0 = keep[0];
                *z1 = keep[1];
                *z2 = keep[2];
                return;
            }
            let dot = (xi[0] * u[0] + xi[1] * u[1] + xi[2] * u[2]) / s;
            let grad = [xi[0] * dot, xi[1] * dot, xi[2] * dot];
            if solenoidal {
                *z0 = u[0] - grad[0];
                *z1 = u[1] - grad[1];
                *z2 = u[2] - grad[2];
            } else {
                *z0 = grad[0];
                *z1 = grad[1];
                *z2 = grad[2];
            }
        });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec_field(g: &Grid, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = SpectralField::zeros(g, 3);
        for c in 0..3 {
            for z in f.comp_mut(c).iter_mut() {
                *z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        f
    }

    #[test]
    fn leray_projection_is_idempotent_and_complements_q() {
        let g = Grid::new(12, 2.0 * std::f64::consts::PI).unwrap();
        let f = random_vec_field(&g, 7);
        let p = project_solenoidal(&f);
        let pp = project_solenoidal(&p);
        assert!(p.max_coeff_diff(&pp) < 1e-14);
        // P + Q = I
        let q = project_gradient(&f);
        let mut sum = p.clone();
        sum.axpy(1.0, &q);
        assert!(sum.max_coeff_diff(&f) < 1e-14);
        // div P u = 0
        let d = divergence(&p);
        let max = d.comp(0).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(max < 1e-13);
        // Q u is a gradient: P Q u = 0
        let pq = project_solenoidal(&q);
        let max = pq.coeffs().iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(max < 1e-13);
    }

    #[test]
    fn laplacian_matches_plane_wave_eigenvalue() {
        let g = Grid::new(16, 4.0 * std::f64::consts::PI).unwrap();
        let mut f = SpectralField::zeros(&g, 1);
        let idx = (3 * g.n() + 2) * g.n() + 1; // k = (1, 2, 3)
        f.comp_mut(0)[idx] = Complex64::new(1.0, 0.0);
        laplacian(&mut f);
        let xi = g.xi(idx);
        let want = -(xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]);
        assert!((f.comp(0)[idx].re - want).abs() < 1e-14);
        // L = 4 pi means xi = k / 2, |xi|^2 = 14/4 here
        assert!((want + 14.0 / 4.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_laplacian_inverts_on_mean_free_fields() {
        let g = Grid::new(12, 2.0 * std::f64::consts::PI).unwrap();
        let mut f = random_vec_field(&g, 11);
        for c in 0..3 {
            f.comp_mut(c)[0] = Complex64::default(); // mean-free
        }
        let mut lf = f.clone();
        laplacian(&mut lf);
        inv_laplacian(&mut lf);
        assert!(lf.max_coeff_diff(&f) < 1e-13);
    }

    #[test]
    fn div_grad_is_laplacian() {
        let g = Grid::new(12, 2.0 * std::f64::consts::PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut f = SpectralField::zeros(&g, 1);
        for z in f.comp_mut(0).iter_mut() {
            *z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let dg = divergence(&gradient(&f));
        let mut lf = f.clone();
        laplacian(&mut lf);
        assert!(dg.max_coeff_diff(&lf) < 1e-13);
    }
}
