//! Time integration of the perturbation systems around the stationary
//! solutions: the compressible pair (sigma, w) and the incompressible
//! deviation u_tilde.
//!
//! The integrator is ETDRK2. Its entire justification is that the stiff
//! linear part - acoustic oscillation and damping at rate 1/eps on the
//! longitudinal block, heat flow on the rest - is propagated *exactly* per
//! mode, so the step size answers only to the nonlinearity. The
//! symmetrized longitudinal variables (gamma2 sigma, xi_hat . w_hat) evolve
//! by the same 2x2 family as the acoustic module, evaluated at the
//! effective Mach parameter eps/gamma and viscosity mu0/rho_inf; the
//! transverse block is a scalar heat factor mu/rho_inf per mode.

use crate::error::{LabError, Result};
use crate::etd::{phi_block, phi_scalar, HLadder};
use crate::field::{map_scalar, map_scalar2, mul_scalar, SpectralField};
use crate::grid::Grid;
use crate::linalg::MatC;
use crate::multiplier::{
    advect, div_outer, divergence, gradient, lame_operator, project_solenoidal,
};
use crate::params::PhysicalParams;
use crate::stationary::StationaryPair;
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::HashMap;

#[derive(Clone)]
pub struct PerturbationState {
    pub sigma: SpectralField,
    pub w: SpectralField,
    pub t: f64,
}

impl PerturbationState {
    pub fn new(sigma: SpectralField, w: SpectralField) -> PerturbationState {
        assert_eq!(sigma.components(), 1);
        assert_eq!(w.components(), 3);
        PerturbationState { sigma, w, t: 0.0 }
    }

    pub fn norm(&self) -> f64 {
        let s = self.sigma.l2_norm();
        let w = self.w.l2_norm();
        (s * s + w * w).sqrt()
    }
}

#[derive(Clone)]
pub struct IncompressibleState {
    pub u_tilde: SpectralField,
    pub t: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct StepOptions {
    pub atol: f64,
    pub rtol: f64,
    /// Largest step the ladder may take; also the first attempt.
    pub h_init: f64,
    pub max_steps: usize,
}

impl Default for StepOptions {
    fn default() -> StepOptions {
        StepOptions {
            atol: 1e-8,
            rtol: 1e-6,
            h_init: 0.25,
            max_steps: 200_000,
        }
    }
}

/// Per-mode propagator tables for one step size h: the longitudinal 2x2
/// triple (e^{hM}, h phi1(hM), h phi2(hM)) packed contiguously, and the
/// transverse/zero-mode scalar triple for z = -(mu/rho_inf)|xi|^2 h.
/// Aliased modes hold zeros - their coefficients are identically zero.
struct ModeTables {
    long: Vec<[Complex64; 12]>,
    heat: Vec<[f64; 3]>,
}

fn build_tables(grid: &Grid, params: &PhysicalParams, eps: f64, h: f64) -> ModeTables {
    let eps_eff = params.eps_eff(eps);
    let mu0_eff = params.mu0() / params.rho_inf;
    let mu_eff = params.mu / params.rho_inf;
    let n3 = grid.mode_count();
    let mut long = vec![[Complex64::default(); 12]; n3];
    let mut heat = vec![[0.0f64; 3]; n3];
    long.par_iter_mut()
        .zip(heat.par_iter_mut())
        .enumerate()
        .for_each(|(i, (lg, ht))| {
            if i != 0 && grid.aliased(i) {
                return;
            }
            let r = grid.xi_norm(i);
            let (e, p1, p2) = phi_scalar(Complex64::new(-mu_eff * r * r * h, 0.0));
            *ht = [e.re, h * p1.re, h * p2.re];
            if r == 0.0 {
                return;
            }
            let k = r / eps_eff;
            let m = mu0_eff * r * r;
            let mut a = MatC::zeros(2);
            a[(0, 1)] = Complex64::new(0.0, -k * h);
            a[(1, 0)] = Complex64::new(0.0, -k * h);
            a[(1, 1)] = Complex64::new(-2.0 * m * h, 0.0);
            let (e, p1, p2) = phi_block(&a);
            for (dst, src, scale) in [(0, &e, 1.0), (4, &p1, h), (8, &p2, h)] {
                for j in 0..4 {
                    lg[dst + j] = src.a[j] * scale;
                }
            }
        });
    ModeTables { long, heat }
}

/// Which member of the table triple to apply: e^{hA}, h phi1, or h phi2.
#[derive(Clone, Copy)]
enum Tbl {
    E = 0,
    HPhi1 = 1,
    HPhi2 = 2,
}

fn apply_tables(
    grid: &Grid,
    gamma2: f64,
    tbl: &ModeTables,
    which: Tbl,
    sigma: &SpectralField,
    w: &SpectralField,
) -> (SpectralField, SpectralField) {
    let n3 = grid.mode_count();
    let which = which as usize;
    let ss = sigma.comp(0);
    let (iw0, iw1, iw2) = (w.comp(0), w.comp(1), w.comp(2));
    let mut so = SpectralField::zeros(grid, 1);
    let mut wo = SpectralField::zeros(grid, 3);
    {
        let sov = so.coeffs_mut();
        let (w0o, rest) = wo.coeffs_mut().split_at_mut(n3);
        let (w1o, w2o) = rest.split_at_mut(n3);
        sov.par_iter_mut()
            .zip(w0o.par_iter_mut())
            .zip(w1o.par_iter_mut())
            .zip(w2o.par_iter_mut())
            .enumerate()
            .for_each(|(i, (((zs, z0), z1), z2))| {
                let hscale = tbl.heat[i][which];
                let win = [iw0[i], iw1[i], iw2[i]];
                let r = grid.xi_norm(i);
                if r == 0.0 {
                    // uncoupled: d/dt of the means carries no linear term
                    *zs = ss[i] * hscale;
                    *z0 = win[0] * hscale;
                    *z1 = win[1] * hscale;
                    *z2 = win[2] * hscale;
                    return;
                }
                let xi = grid.xi(i);
                let unit = [xi[0] / r, xi[1] / r, xi[2] / r];
                let wpar = unit[0] * win[0] + unit[1] * win[1] + unit[2] * win[2];
                let a = &tbl.long[i][4 * which..4 * which + 4];
                let y0 = gamma2 * ss[i];
                let s_new = a[0] * y0 + a[1] * wpar;
                let p_new = a[2] * y0 + a[3] * wpar;
                *zs = s_new / gamma2;
                *z0 = p_new * unit[0] + (win[0] - wpar * unit[0]) * hscale;
                *z1 = p_new * unit[1] + (win[1] - wpar * unit[1]) * hscale;
                *z2 = p_new * unit[2] + (win[2] - wpar * unit[2]) * hscale;
            });
    }
    (so, wo)
}

enum SystemMode {
    /// (sigma, w) around a stationary pair; nonlinearity is (f, g).
    Perturbation {
        sigma_star: SpectralField,
        v_star: SpectralField,
    },
    /// full (b, v) with the stationary force as a source; the same linear
    /// blocks apply since the linearization point is (rho_inf, 0).
    Full { force: SpectralField },
}

pub struct CompressibleSystem {
    grid: Grid,
    params: PhysicalParams,
    eps: f64,
    mode: SystemMode,
    /// Scales the whole nonlinear evaluation; theta -> 0 isolates the
    /// linear semigroup for cross-validation.
    pub nonlinear_scale: f64,
    tables: HashMap<u64, ModeTables>,
    table_order: Vec<u64>,
}

const TABLE_CACHE_CAP: usize = 4;

impl CompressibleSystem {
    pub fn perturbation(
        grid: &Grid,
        stationary: &StationaryPair,
        eps: f64,
        params: &PhysicalParams,
    ) -> CompressibleSystem {
        CompressibleSystem::with_mode(
            grid,
            eps,
            params,
            SystemMode::Perturbation {
                sigma_star: stationary.b_star.clone(),
                v_star: stationary.v_star.clone(),
            },
        )
    }

    /// Perturbation around the trivial stationary solution (F = 0).
    pub fn free(grid: &Grid, eps: f64, params: &PhysicalParams) -> CompressibleSystem {
        CompressibleSystem::with_mode(
            grid,
            eps,
            params,
            SystemMode::Perturbation {
                sigma_star: SpectralField::zeros(grid, 1),
                v_star: SpectralField::zeros(grid, 3),
            },
        )
    }

    /// Full-variable integration of (b, v) under the force F; used as the
    /// equilibrium witness that the perturbation form and the stationary
    /// solver describe the same dynamics.
    pub fn full(
        grid: &Grid,
        force: &SpectralField,
        eps: f64,
        params: &PhysicalParams,
    ) -> CompressibleSystem {
        CompressibleSystem::with_mode(
            grid,
            eps,
            params,
            SystemMode::Full {
                force: force.clone(),
            },
        )
    }

    fn with_mode(
        grid: &Grid,
        eps: f64,
        params: &PhysicalParams,
        mode: SystemMode,
    ) -> CompressibleSystem {
        assert!(eps > 0.0);
        CompressibleSystem {
            grid: grid.clone(),
            params: *params,
            eps,
            mode,
            nonlinear_scale: 1.0,
            tables: HashMap::new(),
            table_order: Vec::new(),
        }
    }

    fn nonlinear(&self, state: &PerturbationState) -> Result<(SpectralField, SpectralField)> {
        let (mut f, mut g) = match &self.mode {
            SystemMode::Perturbation {
                sigma_star,
                v_star,
            } => eval_nonlinear_fg(state, sigma_star, v_star, self.eps, &self.params)?,
            SystemMode::Full { force } => {
                eval_full_fg(&state.sigma, &state.w, force, self.eps, &self.params)?
            }
        };
        if self.nonlinear_scale != 1.0 {
            f.scale(self.nonlinear_scale);
            g.scale(self.nonlinear_scale);
        }
        Ok((f, g))
    }

    fn ensure_tables(&mut self, h: f64) {
        let key = h.to_bits();
        if self.tables.contains_key(&key) {
            return;
        }
        if self.table_order.len() >= TABLE_CACHE_CAP {
            let old = self.table_order.remove(0);
            self.tables.remove(&old);
        }
        self.tables
            .insert(key, build_tables(&self.grid, &self.params, self.eps, h));
        self.table_order.push(key);
    }

    /// One ETDRK2 step of size h from a precomputed N(state). Returns the
    /// stepped state and the raw L^2 size of the embedded error estimate.
    fn etdrk2(
        &mut self,
        state: &PerturbationState,
        n0: &(SpectralField, SpectralField),
        h: f64,
    ) -> Result<(PerturbationState, f64)> {
        self.ensure_tables(h);
        let tbl = &self.tables[&h.to_bits()];
        let g2 = self.params.gamma2();
        let (es, ew) = apply_tables(&self.grid, g2, tbl, Tbl::E, &state.sigma, &state.w);
        let (ps, pw) = apply_tables(&self.grid, g2, tbl, Tbl::HPhi1, &n0.0, &n0.1);
        let mut a_sigma = es;
        a_sigma.axpy(1.0, &ps);
        let mut a_w = ew;
        a_w.axpy(1.0, &pw);
        let predictor = PerturbationState {
            sigma: a_sigma,
            w: a_w,
            t: state.t + h,
        };
        let (mut f1, mut g1) = self.nonlinear(&predictor)?;
        f1.axpy(-1.0, &n0.0);
        g1.axpy(-1.0, &n0.1);
        let tbl = &self.tables[&h.to_bits()];
        let (ds, dw) = apply_tables(&self.grid, g2, tbl, Tbl::HPhi2, &f1, &g1);
        let err = {
            let a = ds.l2_norm();
            let b = dw.l2_norm();
            (a * a + b * b).sqrt()
        };
        let mut sigma = predictor.sigma;
        sigma.axpy(1.0, &ds);
        let mut w = predictor.w;
        w.axpy(1.0, &dw);
        Ok((
            PerturbationState {
                sigma,
                w,
                t: state.t + h,
            },
            err,
        ))
    }

    /// Single explicit step (no adaptivity): the building block the spec
    /// names. The embedded error estimate is returned alongside.
    pub fn step(
        &mut self,
        state: &PerturbationState,
        dt: f64,
    ) -> Result<(PerturbationState, f64)> {
        assert!(dt > 0.0);
        let n0 = self.nonlinear(state)?;
        self.etdrk2(state, &n0, dt)
    }

    /// Adaptive integration to t_end, calling `observer` exactly at each of
    /// `sample_times` (which must be ascending and within [state.t, t_end]).
    /// Steps land on sample times by clamping, so observations are exact
    /// trajectory points, not interpolants.
    pub fn integrate<F: FnMut(&PerturbationState)>(
        &mut self,
        state: PerturbationState,
        t_end: f64,
        opts: StepOptions,
        sample_times: &[f64],
        mut observer: F,
    ) -> Result<PerturbationState> {
        let tiny = 1e-9 * t_end.abs().max(1.0);
        let mut state = state;
        let mut ladder = HLadder {
            h_max: opts.h_init,
            level: 0,
        };
        let mut next_sample = 0usize;
        while next_sample < sample_times.len() && sample_times[next_sample] <= state.t + tiny {
            observer(&state);
            next_sample += 1;
        }
        let mut steps = 0usize;
        while state.t < t_end - tiny {
            let n0 = self.nonlinear(&state)?;
            let scale_norm = opts.atol + opts.rtol * state.norm();
            loop {
                steps += 1;
                if steps > opts.max_steps {
                    return Err(LabError::numerics(format!(
                        "integration exceeded {} steps at t = {:.3e}",
                        opts.max_steps, state.t
                    )));
                }
                let h_ladder = ladder.h();
                let mut h = h_ladder.min(t_end - state.t);
                if next_sample < sample_times.len() {
                    h = h.min(sample_times[next_sample] - state.t);
                }
                assert!(h > 0.0);
                let (cand, err) = self.etdrk2(&state, &n0, h)?;
                let scaled = err / scale_norm;
                if scaled <= 1.0 {
                    // only unclamped steps inform the ladder upward
                    if h == h_ladder {
                        ladder.adapt(scaled);
                    }
                    state = cand;
                    break;
                }
                ladder.adapt(scaled);
            }
            while next_sample < sample_times.len() && sample_times[next_sample] <= state.t + tiny
            {
                observer(&state);
                next_sample += 1;
            }
        }
        Ok(state)
    }
}

/// f = -div{(v* + w) sigma + sigma* w} and g = g1 + g2 + g3 + g4 of the
/// perturbation system, assembled with dealiased products:
///   g1 = -(v*.grad)w - (w.grad)(v* + w)
///   g2 = -[Phi(eps(s*+s)) - Phi(eps s*)] grad s* / eps
///        -[Phi(eps(s*+s)) - Phi(0)] grad s / eps
///   g3 = [Psi(eps(s*+s)) - Psi(eps s*)] A(v* + w)
///   g4 = [Psi(eps s*) - Psi(0)] A w
/// with Phi(z) = P'(rho_inf + z)/(rho_inf + z), Psi(z) = 1/(rho_inf + z)
/// and A the Lame operator. Composition differences are taken pointwise
/// before any filtering so their eps-cancellation happens in real
/// arithmetic.
pub fn eval_nonlinear_fg(
    state: &PerturbationState,
    sigma_star: &SpectralField,
    v_star: &SpectralField,
    eps: f64,
    params: &PhysicalParams,
) -> Result<(SpectralField, SpectralField)> {
    let rho_inf = params.rho_inf;
    let law = params.pressure_law;
    let phi = |z: f64| law.p_prime(rho_inf + z) / (rho_inf + z);
    let psi = |z: f64| 1.0 / (rho_inf + z);
    let (phi0, psi0) = (phi(0.0), psi(0.0));

    let mut total = state.sigma.clone();
    total.axpy(1.0, sigma_star);
    check_density(&total, eps, rho_inf)?;

    let mut vs = v_star.clone();
    vs.axpy(1.0, &state.w);

    // f
    let mut flux = mul_scalar(&state.sigma, &vs);
    flux.axpy(1.0, &mul_scalar(sigma_star, &state.w));
    let mut f = divergence(&flux);
    f.scale(-1.0);

    // g1
    let mut g = advect(v_star, &state.w);
    g.axpy(1.0, &advect(&state.w, &vs));
    g.scale(-1.0);

    // g2
    let d1 = map_scalar2(&total, sigma_star, |a, b| (phi(eps * a) - phi(eps * b)) / eps);
    let d2 = map_scalar(&total, |a| (phi(eps * a) - phi0) / eps);
    g.axpy(-1.0, &mul_scalar(&d1, &gradient(sigma_star)));
    g.axpy(-1.0, &mul_scalar(&d2, &gradient(&state.sigma)));

    // g3, g4
    let lam = params.mu + params.mu_prime;
    let e1 = map_scalar2(&total, sigma_star, |a, b| psi(eps * a) - psi(eps * b));
    g.axpy(1.0, &mul_scalar(&e1, &lame_operator(&vs, params.mu, lam)));
    let e2 = map_scalar(sigma_star, |b| psi(eps * b) - psi0);
    g.axpy(1.0, &mul_scalar(&e2, &lame_operator(&state.w, params.mu, lam)));

    Ok((f, g))
}

/// Source terms of the full system in the variables (b, v):
/// f = -div(b v), g = -(v.grad)v - [Phi(eps b) - Phi(0)] grad b / eps
/// + [Psi(eps b) - Psi(0)] A v + F.
pub fn eval_full_fg(
    b: &SpectralField,
    v: &SpectralField,
    force: &SpectralField,
    eps: f64,
    params: &PhysicalParams,
) -> Result<(SpectralField, SpectralField)> {
    let rho_inf = params.rho_inf;
    let law = params.pressure_law;
    let phi = |z: f64| law.p_prime(rho_inf + z) / (rho_inf + z);
    let psi = |z: f64| 1.0 / (rho_inf + z);
    let (phi0, psi0) = (phi(0.0), psi(0.0));
    check_density(b, eps, rho_inf)?;

    let mut f = divergence(&mul_scalar(b, v));
    f.scale(-1.0);

    let mut g = advect(v, v);
    g.scale(-1.0);
    let d = map_scalar(b, |z| (phi(eps * z) - phi0) / eps);
    g.axpy(-1.0, &mul_scalar(&d, &gradient(b)));
    let e = map_scalar(b, |z| psi(eps * z) - psi0);
    let lam = params.mu + params.mu_prime;
    g.axpy(1.0, &mul_scalar(&e, &lame_operator(v, params.mu, lam)));
    g.axpy(1.0, force);
    Ok((f, g))
}

fn check_density(b: &SpectralField, eps: f64, rho_inf: f64) -> Result<()> {
    let min_rho = b
        .to_physical(0)
        .iter()
        .map(|z| rho_inf + eps * z.re)
        .fold(f64::INFINITY, f64::min);
    if min_rho <= 0.0 {
        return Err(LabError::numerics(format!(
            "density reaches {min_rho:.3e} <= 0"
        )));
    }
    Ok(())
}

/// Source of the heat equation for w1 = Pw - u_tilde, assembled term by
/// term in the advective form:
///   h1 = -(w1.grad)v - (u_tilde.grad)w1 - (u*.grad)w1
///   h2 = -(Qw.grad)v - (u_tilde.grad)Qw - (u*.grad)Qw
///        - (u_tilde.grad)(v* - u*) - ((v* - u*).grad)w
///   h3, h4 = the viscosity compositions of g3, g4
/// plus the pressure composition g2, which survives the Leray projection
/// and belongs to the exact identity Ph = P[g + div(u_tilde (x) u) +
/// div(u* (x) u_tilde)] even though it is not advective in form.
#[allow(clippy::too_many_arguments)]
pub fn eval_h_terms(
    w1: &SpectralField,
    qw: &SpectralField,
    sigma: &SpectralField,
    sigma_star: &SpectralField,
    v_star: &SpectralField,
    u_tilde: &SpectralField,
    u_star: &SpectralField,
    eps: f64,
    params: &PhysicalParams,
) -> Result<SpectralField> {
    let rho_inf = params.rho_inf;
    let law = params.pressure_law;
    let phi = |z: f64| law.p_prime(rho_inf + z) / (rho_inf + z);
    let psi = |z: f64| 1.0 / (rho_inf + z);
    let (phi0, psi0) = (phi(0.0), psi(0.0));

    let mut w = w1.clone();
    w.axpy(1.0, u_tilde);
    w.axpy(1.0, qw);
    let mut v = v_star.clone();
    v.axpy(1.0, &w);
    let mut vmu = v_star.clone();
    vmu.axpy(-1.0, u_star);

    // h1
    let mut h = advect(w1, &v);
    h.axpy(1.0, &advect(u_tilde, w1));
    h.axpy(1.0, &advect(u_star, w1));
    // h2
    h.axpy(1.0, &advect(qw, &v));
    h.axpy(1.0, &advect(u_tilde, qw));
    h.axpy(1.0, &advect(u_star, qw));
    h.axpy(1.0, &advect(u_tilde, &vmu));
    h.axpy(1.0, &advect(&vmu, &w));
    h.scale(-1.0);

    // h3, h4
    let mut total = sigma.clone();
    total.axpy(1.0, sigma_star);
    let lam = params.mu + params.mu_prime;
    let e1 = map_scalar2(&total, sigma_star, |a, b| psi(eps * a) - psi(eps * b));
    h.axpy(1.0, &mul_scalar(&e1, &lame_operator(&v, params.mu, lam)));
    let e2 = map_scalar(sigma_star, |b| psi(eps * b) - psi0);
    h.axpy(1.0, &mul_scalar(&e2, &lame_operator(&w, params.mu, lam)));

    // the g2 completion
    let d1 = map_scalar2(&total, sigma_star, |a, b| (phi(eps * a) - phi(eps * b)) / eps);
    let d2 = map_scalar(&total, |a| (phi(eps * a) - phi0) / eps);
    h.axpy(-1.0, &mul_scalar(&d1, &gradient(sigma_star)));
    h.axpy(-1.0, &mul_scalar(&d2, &gradient(sigma)));
    Ok(h)
}

/// Heat-kernel Duhamel reconstruction of w1(t) from sampled sources:
/// e^{c t Lap} w1(0) + int_0^t e^{c (t - s) Lap} Ph(s) ds by the
/// trapezoid rule on the given snapshots (ascending times, first at 0).
pub fn reconstruct_w1(
    snapshots: &[(f64, SpectralField)],
    w1_0: &SpectralField,
    c: f64,
) -> SpectralField {
    assert!(snapshots.len() >= 2);
    let t_end = snapshots.last().unwrap().0;
    let mut acc = crate::acoustic::apply_heat(w1_0, t_end, c);
    for pair in snapshots.windows(2) {
        let (t0, ref p0) = pair[0];
        let (t1, ref p1) = pair[1];
        let dt = t1 - t0;
        let mut seg = crate::acoustic::apply_heat(p0, t_end - t0, c);
        seg.axpy(1.0, &crate::acoustic::apply_heat(p1, t_end - t1, c));
        acc.axpy(0.5 * dt, &seg);
    }
    acc
}

pub struct IncompressibleSystem {
    grid: Grid,
    params: PhysicalParams,
    u_star: SpectralField,
    tables: HashMap<u64, Vec<[f64; 3]>>,
    table_order: Vec<u64>,
}

fn build_heat_tables(grid: &Grid, c: f64, h: f64) -> Vec<[f64; 3]> {
    (0..grid.mode_count())
        .map(|i| {
            let r2 = grid.xi_norm_sq(i);
            let (e, p1, p2) = phi_scalar(Complex64::new(-c * r2 * h, 0.0));
            [e.re, h * p1.re, h * p2.re]
        })
        .collect()
}

fn apply_heat_table(
    grid: &Grid,
    tbl: &[[f64; 3]],
    which: usize,
    f: &SpectralField,
) -> SpectralField {
    let n3 = grid.mode_count();
    let mut out = f.clone();
    out.coeffs_mut().par_chunks_mut(n3).for_each(|comp| {
        for (i, z) in comp.iter_mut().enumerate() {
            *z *= tbl[i][which];
        }
    });
    out
}

impl IncompressibleSystem {
    pub fn new(grid: &Grid, u_star: &SpectralField, params: &PhysicalParams) -> Self {
        IncompressibleSystem {
            grid: grid.clone(),
            params: *params,
            u_star: u_star.clone(),
            tables: HashMap::new(),
            table_order: Vec::new(),
        }
    }

    /// -P[div(u_tilde (x) u) + div(u* (x) u_tilde)], u = u* + u_tilde.
    fn nonlinear(&self, ut: &SpectralField) -> SpectralField {
        let mut u = self.u_star.clone();
        u.axpy(1.0, ut);
        let mut n = div_outer(ut, &u);
        n.axpy(1.0, &div_outer(&self.u_star, ut));
        let mut n = project_solenoidal(&n);
        n.scale(-1.0);
        n
    }

    fn ensure_tables(&mut self, h: f64) {
        let key = h.to_bits();
        if self.tables.contains_key(&key) {
            return;
        }
        if self.table_order.len() >= TABLE_CACHE_CAP {
            let old = self.table_order.remove(0);
            self.tables.remove(&old);
        }
        let c = self.params.mu / self.params.rho_inf;
        self.tables.insert(key, build_heat_tables(&self.grid, c, h));
        self.table_order.push(key);
    }

    pub fn step(
        &mut self,
        state: &IncompressibleState,
        dt: f64,
    ) -> (IncompressibleState, f64) {
        assert!(dt > 0.0);
        let n0 = self.nonlinear(&state.u_tilde);
        self.etdrk2(state, &n0, dt)
    }

    fn etdrk2(
        &mut self,
        state: &IncompressibleState,
        n0: &SpectralField,
        h: f64,
    ) -> (IncompressibleState, f64) {
        self.ensure_tables(h);
        let tbl = &self.tables[&h.to_bits()];
        let mut a = apply_heat_table(&self.grid, tbl, 0, &state.u_tilde);
        a.axpy(1.0, &apply_heat_table(&self.grid, tbl, 1, n0));
        let mut n1 = self.nonlinear(&a);
        n1.axpy(-1.0, n0);
        let tbl = &self.tables[&h.to_bits()];
        let d = apply_heat_table(&self.grid, tbl, 2, &n1);
        let err = d.l2_norm();
        a.axpy(1.0, &d);
        let u_tilde = project_solenoidal(&a);
        (
            IncompressibleState {
                u_tilde,
                t: state.t + h,
            },
            err,
        )
    }

    pub fn integrate<F: FnMut(&IncompressibleState)>(
        &mut self,
        state: IncompressibleState,
        t_end: f64,
        opts: StepOptions,
        sample_times: &[f64],
        mut observer: F,
    ) -> Result<IncompressibleState> {
        let tiny = 1e-9 * t_end.abs().max(1.0);
        let mut state = state;
        let mut ladder = HLadder {
            h_max: opts.h_init,
            level: 0,
        };
        let mut next_sample = 0usize;
        while next_sample < sample_times.len() && sample_times[next_sample] <= state.t + tiny {
            observer(&state);
            next_sample += 1;
        }
        let mut steps = 0usize;
        while state.t < t_end - tiny {
            let n0 = self.nonlinear(&state.u_tilde);
            let scale_norm = opts.atol + opts.rtol * state.u_tilde.l2_norm();
            loop {
                steps += 1;
                if steps > opts.max_steps {
                    return Err(LabError::numerics(format!(
                        "incompressible integration exceeded {} steps at t = {:.3e}",
                        opts.max_steps, state.t
                    )));
                }
                let h_ladder = ladder.h();
                let mut h = h_ladder.min(t_end - state.t);
                if next_sample < sample_times.len() {
                    h = h.min(sample_times[next_sample] - state.t);
                }
                let (cand, err) = self.etdrk2(&state, &n0, h);
                let scaled = err / scale_norm;
                if scaled <= 1.0 {
                    if h == h_ladder {
                        ladder.adapt(scaled);
                    }
                    state = cand;
                    break;
                }
                ladder.adapt(scaled);
            }
            while next_sample < sample_times.len() && sample_times[next_sample] <= state.t + tiny
            {
                observer(&state);
                next_sample += 1;
            }
        }
        Ok(state)
    }
}

/// One explicit compressible step with default table handling; the struct
/// API is preferable when stepping repeatedly.
pub fn step_compressible(
    state: &PerturbationState,
    stationary: &StationaryPair,
    eps: f64,
    dt: f64,
    params: &PhysicalParams,
) -> Result<PerturbationState> {
    let mut sys = CompressibleSystem::perturbation(state.sigma.grid(), stationary, eps, params);
    sys.step(state, dt).map(|(s, _)| s)
}

pub fn step_incompressible(
    state: &IncompressibleState,
    u_star: &SpectralField,
    dt: f64,
    params: &PhysicalParams,
) -> IncompressibleState {
    let mut sys = IncompressibleSystem::new(state.u_tilde.grid(), u_star, params);
    sys.step(state, dt).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustic::{apply_acoustic, apply_heat};
    use crate::datagen::random_band_field;
    use crate::multiplier::project_gradient;
    use crate::paley::DyadicFilterBank;
    use crate::stationary::{
        make_force, solve_compressible_stationary, solve_incompressible_stationary,
        CompressibleSolveOptions, ForceSpec,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> Grid {
        Grid::new(n, 2.0 * std::f64::consts::PI).unwrap()
    }

    fn test_params() -> PhysicalParams {
        // deliberately non-unit so the gamma2 / eps_eff scalings matter
        PhysicalParams {
            mu: 0.7,
            mu_prime: 0.2,
            rho_inf: 1.3,
            pressure_law: crate::params::PressureLaw::Gamma {
                a: 0.8,
                gamma_ad: 1.4,
            },
        }
    }

    fn small_state(g: &Grid, seed: u64, amp: f64) -> PerturbationState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sigma = random_band_field(g, 1, (0, 1), 0.5, &mut rng);
        sigma.scale(amp / sigma.l2_norm());
        let mut w = random_band_field(g, 3, (0, 1), 0.5, &mut rng);
        w.scale(amp / w.l2_norm());
        PerturbationState::new(sigma, w)
    }

    #[test]
    fn zero_perturbation_is_preserved_exactly() {
        let g = grid(12);
        let bank = DyadicFilterBank::new(&g);
        let params = PhysicalParams::default();
        let f = make_force(
            &g,
            &bank,
            &ForceSpec {
                seed: 3,
                amplitude: 0.05,
                band: (0, 1),
            },
        )
        .unwrap();
        let pair = solve_compressible_stationary(
            &bank,
            &f,
            0.5,
            &params,
            CompressibleSolveOptions {
                tol: 1e-11,
                j_cut: bank.j_max() + 1,
                init: None,
            },
        )
        .unwrap();
        let mut sys = CompressibleSystem::perturbation(&g, &pair, 0.5, &params);
        let z = PerturbationState::new(SpectralField::zeros(&g, 1), SpectralField::zeros(&g, 3));
        let out = sys
            .integrate(z, 1.0, StepOptions::default(), &[], |_| {})
            .unwrap();
        assert_eq!(out.sigma.l2_norm(), 0.0);
        assert_eq!(out.w.l2_norm(), 0.0);
    }

    #[test]
    fn disabled_nonlinearity_reproduces_the_exact_semigroups() {
        let g = grid(16);
        let params = test_params();
        let eps = 0.21;
        let state = small_state(&g, 5, 0.3);
        let mut sys = CompressibleSystem::free(&g, eps, &params);
        sys.nonlinear_scale = 0.0;
        let t = 0.37;
        let (one, _) = sys.step(&state, t).unwrap();

        // reference: acoustic block on (gamma2 sigma, w) at the effective
        // parameters, transverse heat at mu/rho_inf
        let g2 = params.gamma2();
        let mut v4 = SpectralField::zeros(&g, 4);
        v4.comp_mut(0).copy_from_slice(state.sigma.comp(0));
        for c in 0..3 {
            v4.comp_mut(1 + c).copy_from_slice(state.w.comp(c));
        }
        v4.comp_mut(0).iter_mut().for_each(|z| *z *= g2);
        let prop = apply_acoustic(&v4, t, params.eps_eff(eps), params.mu0() / params.rho_inf);
        let mut sigma_ref = SpectralField::zeros(&g, 1);
        sigma_ref.comp_mut(0).copy_from_slice(prop.comp(0));
        sigma_ref.comp_mut(0).iter_mut().for_each(|z| *z /= g2);
        let mut w_prop = SpectralField::zeros(&g, 3);
        for c in 0..3 {
            w_prop.comp_mut(c).copy_from_slice(prop.comp(1 + c));
        }
        let qw_ref = project_gradient(&w_prop);
        let pw_ref = apply_heat(
            &project_solenoidal(&state.w),
            t,
            params.mu / params.rho_inf,
        );
        let mut w_ref = qw_ref;
        w_ref.axpy(1.0, &pw_ref);

        assert!(one.sigma.max_coeff_diff(&sigma_ref) < 1e-12);
        assert!(one.w.max_coeff_diff(&w_ref) < 1e-12);
    }

    #[test]
    fn sigma_mean_is_conserved_per_step() {
        let g = grid(12);
        let params = test_params();
        let mut sys = CompressibleSystem::free(&g, 0.5, &params);
        let mut state = small_state(&g, 7, 0.05);
        for _ in 0..20 {
            state = sys.step(&state, 0.05).unwrap().0;
        }
        assert!(state.sigma.mean(0).norm() < 1e-12);
    }

    #[test]
    fn step_doubling_shows_second_order_local_accuracy() {
        let g = grid(12);
        let params = test_params();
        let mut sys = CompressibleSystem::free(&g, 0.4, &params);
        let state = small_state(&g, 9, 0.2);
        let h = 0.1;
        let coarse = sys.step(&state, h).unwrap().0;
        let mid = sys.step(&state, h / 2.0).unwrap().0;
        let fine = sys.step(&mid, h / 2.0).unwrap().0;
        // reference by many small steps
        let mut reference = state.clone();
        for _ in 0..64 {
            reference = sys.step(&reference, h / 64.0).unwrap().0;
        }
        let err = |a: &PerturbationState| {
            let mut ds = a.sigma.clone();
            ds.axpy(-1.0, &reference.sigma);
            let mut dw = a.w.clone();
            dw.axpy(-1.0, &reference.w);
            (ds.l2_norm().powi(2) + dw.l2_norm().powi(2)).sqrt()
        };
        let ratio = err(&coarse) / err(&fine);
        assert!(
            (3.0..=5.0).contains(&ratio),
            "local order ratio {ratio:.2} outside [3, 5]"
        );
    }

    #[test]
    fn stationary_pair_is_a_fixed_point_of_the_full_system() {
        // "fixed point" holds modulo the uniform momentum mode: homogeneous
        // norms never see k = 0, and the mean momentum genuinely
        // accelerates at the rate mean(g) ~ eps <b* F> because the
        // solvability constraint int rho F = 0 is not imposed on the force
        let g = grid(16);
        let bank = DyadicFilterBank::new(&g);
        let params = PhysicalParams::default();
        let f = make_force(
            &g,
            &bank,
            &ForceSpec {
                seed: 11,
                amplitude: 0.05,
                band: (0, 1),
            },
        )
        .unwrap();
        let eps = 0.5;
        let pair = solve_compressible_stationary(
            &bank,
            &f,
            eps,
            &params,
            CompressibleSolveOptions {
                tol: 1e-13,
                j_cut: bank.j_max() + 1,
                init: None,
            },
        )
        .unwrap();
        let mut sys = CompressibleSystem::full(&g, &f, eps, &params);
        let start = PerturbationState::new(pair.b_star.clone(), pair.v_star.clone());
        let opts = StepOptions {
            atol: 1e-11,
            rtol: 1e-9,
            ..StepOptions::default()
        };
        let t_end = 1.0;
        let out = sys
            .integrate(start.clone(), t_end, opts, &[], |_| {})
            .unwrap();
        let mut db = out.sigma.clone();
        db.axpy(-1.0, &start.sigma);
        let mut dv = out.w.clone();
        dv.axpy(-1.0, &start.w);
        let mean_drift: Vec<Complex64> = (0..3).map(|c| dv.mean(c)).collect();
        for c in 0..3 {
            dv.comp_mut(c)[0] = Complex64::default();
        }
        let drift = (db.l2_norm().powi(2) + dv.l2_norm().powi(2)).sqrt();
        assert!(drift < 1e-12, "equilibrium drift {drift:.2e} per unit time");
        // the mean drifts linearly at mean(g) evaluated at the pair
        let (_, g_rhs) =
            eval_full_fg(&pair.b_star, &pair.v_star, &f, eps, &params).unwrap();
        for c in 0..3 {
            let predicted = g_rhs.mean(c) * t_end;
            assert!(
                (mean_drift[c] - predicted).norm() < 1e-13,
                "mean momentum drift {:.3e} vs predicted {:.3e}",
                mean_drift[c].norm(),
                predicted.norm()
            );
        }
    }

    #[test]
    fn f_matches_one_pass_physical_assembly() {
        let g = grid(16);
        let params = test_params();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut sigma = random_band_field(&g, 1, (0, 0), 0.5, &mut rng);
        sigma.scale(0.2 / sigma.l2_norm());
        let mut w = random_band_field(&g, 3, (0, 0), 0.5, &mut rng);
        w.scale(0.2 / w.l2_norm());
        let mut sigma_star = random_band_field(&g, 1, (0, 0), 0.5, &mut rng);
        sigma_star.scale(0.2 / sigma_star.l2_norm());
        let mut v_star = random_band_field(&g, 3, (0, 0), 0.5, &mut rng);
        v_star.scale(0.2 / v_star.l2_norm());
        let state = PerturbationState::new(sigma.clone(), w.clone());
        let (f, _) = eval_nonlinear_fg(&state, &sigma_star, &v_star, 0.3, &params).unwrap();

        // one-pass oracle: the flux (v* + w) sigma + sigma* w evaluated
        // pointwise, one transform, then the spectral divergence
        let n3 = g.mode_count();
        let ps = sigma.to_physical(0);
        let pss = sigma_star.to_physical(0);
        let pw = w.to_physical_all();
        let pv = v_star.to_physical_all();
        let mut flux = SpectralField::zeros(&g, 3);
        for c in 0..3 {
            let vals: Vec<Complex64> = (0..n3)
                .map(|x| (pv[c * n3 + x] + pw[c * n3 + x]) * ps[x] + pss[x] * pw[c * n3 + x])
                .collect();
            let t = SpectralField::from_physical(&g, 1, vals);
            flux.comp_mut(c).copy_from_slice(t.comp(0));
        }
        let mut want = divergence(&flux);
        want.scale(-1.0);
        let scale = f.l2_norm().max(1.0);
        assert!(f.max_coeff_diff(&want) < 1e-11 * scale);
    }

    #[test]
    fn h_terms_complete_the_projected_momentum_sources() {
        // the advective display h1 + h2 (+ compositions + g2) must equal
        // g + div(u_tilde (x) u) + div(u* (x) u_tilde) up to a gradient,
        // i.e. exactly after Leray projection - an algebraic identity that
        // catches sign and pairing errors in either assembly
        let g = grid(16);
        let params = test_params();
        let eps = 0.3;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let amp = 0.1;
        let mk = |m: usize, rng: &mut ChaCha8Rng| {
            let mut f = random_band_field(&g, m, (0, 0), 0.5, rng);
            f.scale(amp / f.l2_norm());
            f
        };
        let sigma = mk(1, &mut rng);
        let sigma_star = mk(1, &mut rng);
        let v_star = mk(3, &mut rng);
        let u_star = project_solenoidal(&mk(3, &mut rng));
        let u_tilde = project_solenoidal(&mk(3, &mut rng));
        let w = mk(3, &mut rng);
        let qw = project_gradient(&w);
        let pw = project_solenoidal(&w);
        let mut w1 = pw.clone();
        w1.axpy(-1.0, &u_tilde);

        let h = eval_h_terms(
            &w1, &qw, &sigma, &sigma_star, &v_star, &u_tilde, &u_star, eps, &params,
        )
        .unwrap();

        let state = PerturbationState::new(sigma.clone(), w.clone());
        let (_, g_full) = eval_nonlinear_fg(&state, &sigma_star, &v_star, eps, &params).unwrap();
        let mut u = u_star.clone();
        u.axpy(1.0, &u_tilde);
        let mut want = g_full;
        want.axpy(1.0, &div_outer(&u_tilde, &u));
        want.axpy(1.0, &div_outer(&u_star, &u_tilde));

        let ph = project_solenoidal(&h);
        let pwant = project_solenoidal(&want);
        let scale = pwant.l2_norm().max(1e-10);
        let diff = {
            let mut d = ph.clone();
            d.axpy(-1.0, &pwant);
            d.l2_norm()
        };
        assert!(diff < 1e-11 * scale.max(1.0), "identity gap {diff:.2e}");
    }

    #[test]
    fn viscosity_compositions_scale_linearly_in_eps() {
        let g = grid(12);
        let params = test_params();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let mut sigma = random_band_field(&g, 1, (0, 1), 0.5, &mut rng);
        sigma.scale(0.1 / sigma.l2_norm());
        let mut sigma_star = random_band_field(&g, 1, (0, 1), 0.5, &mut rng);
        sigma_star.scale(0.1 / sigma_star.l2_norm());
        let mut w = random_band_field(&g, 3, (0, 1), 0.5, &mut rng);
        w.scale(0.1 / w.l2_norm());
        let v_star = SpectralField::zeros(&g, 3);
        let psi = |z: f64| 1.0 / (params.rho_inf + z);
        let lam = params.mu + params.mu_prime;
        let mut samples3 = Vec::new();
        let mut samples4 = Vec::new();
        for k in 0..5 {
            let eps = 0.4 / 2f64.powi(k);
            let mut total = sigma.clone();
            total.axpy(1.0, &sigma_star);
            let mut vw = v_star.clone();
            vw.axpy(1.0, &w);
            let e1 = map_scalar2(&total, &sigma_star, |a, b| psi(eps * a) - psi(eps * b));
            let h3 = mul_scalar(&e1, &lame_operator(&vw, params.mu, lam));
            let e2 = map_scalar(&sigma_star, |b| psi(eps * b) - psi(0.0));
            let h4 = mul_scalar(&e2, &lame_operator(&w, params.mu, lam));
            samples3.push((eps, h3.l2_norm()));
            samples4.push((eps, h4.l2_norm()));
        }
        for s in [&samples3, &samples4] {
            let fit = crate::fit::fit_rate(s, false, true).unwrap();
            assert!(
                (0.9..=1.1).contains(&fit.slope),
                "composition eps-slope {}",
                fit.slope
            );
        }
    }

    #[test]
    fn linear_regime_converges_to_the_semigroup_at_rate_theta() {
        let g = grid(12);
        let params = test_params();
        let eps = 0.35;
        let state = small_state(&g, 23, 0.2);
        let t = 0.5;
        let reference = {
            let mut sys = CompressibleSystem::free(&g, eps, &params);
            sys.nonlinear_scale = 0.0;
            sys.integrate(state.clone(), t, StepOptions::default(), &[], |_| {})
                .unwrap()
        };
        let mut gaps = Vec::new();
        for &theta in &[1e-2, 1e-3, 1e-4] {
            let mut sys = CompressibleSystem::free(&g, eps, &params);
            sys.nonlinear_scale = theta;
            let opts = StepOptions {
                atol: 1e-12,
                rtol: 1e-10,
                ..StepOptions::default()
            };
            let out = sys.integrate(state.clone(), t, opts, &[], |_| {}).unwrap();
            let mut ds = out.sigma.clone();
            ds.axpy(-1.0, &reference.sigma);
            let mut dw = out.w.clone();
            dw.axpy(-1.0, &reference.w);
            gaps.push((theta, (ds.l2_norm().powi(2) + dw.l2_norm().powi(2)).sqrt()));
        }
        // successive theta drop by 10; the gap should follow within 2x
        for p in gaps.windows(2) {
            let ratio = p[0].1 / p[1].1;
            assert!(
                (5.0..=20.0).contains(&ratio),
                "theta-linearity ratio {ratio:.2}"
            );
        }
    }

    #[test]
    fn incompressible_zero_and_heat_regimes() {
        let g = grid(12);
        let params = test_params();
        let u_star = SpectralField::zeros(&g, 3);
        let mut sys = IncompressibleSystem::new(&g, &u_star, &params);
        // zero stays zero
        let z = IncompressibleState {
            u_tilde: SpectralField::zeros(&g, 3),
            t: 0.0,
        };
        let out = sys
            .integrate(z, 1.0, StepOptions::default(), &[], |_| {})
            .unwrap();
        assert_eq!(out.u_tilde.l2_norm(), 0.0);
        // tiny data: heat decay up to O(norm^2)
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let amp = 1e-5;
        let mut u0 = project_solenoidal(&random_band_field(&g, 3, (0, 1), 0.5, &mut rng));
        u0.scale(amp / u0.l2_norm());
        let t = 0.8;
        let out = sys
            .integrate(
                IncompressibleState {
                    u_tilde: u0.clone(),
                    t: 0.0,
                },
                t,
                StepOptions::default(),
                &[],
                |_| {},
            )
            .unwrap();
        let heat = apply_heat(&u0, t, params.mu / params.rho_inf);
        let mut d = out.u_tilde.clone();
        d.axpy(-1.0, &heat);
        assert!(d.l2_norm() < 20.0 * amp * amp, "heat gap {:.2e}", d.l2_norm());
    }

    #[test]
    fn incompressible_trajectory_stays_divergence_free() {
        let g = grid(12);
        let bank = DyadicFilterBank::new(&g);
        let params = PhysicalParams::default();
        let f = make_force(
            &g,
            &bank,
            &ForceSpec {
                seed: 31,
                amplitude: 0.05,
                band: (0, 1),
            },
        )
        .unwrap();
        let inc = solve_incompressible_stationary(&bank, &f, &params, 1e-11).unwrap();
        let mut sys = IncompressibleSystem::new(&g, &inc.u_star, &params);
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let mut u0 = project_solenoidal(&random_band_field(&g, 3, (0, 1), 0.5, &mut rng));
        u0.scale(0.05 / u0.l2_norm());
        let mut state = IncompressibleState { u_tilde: u0, t: 0.0 };
        for _ in 0..100 {
            state = sys.step(&state, 0.01).0;
        }
        let div = divergence(&state.u_tilde).l2_norm() / state.u_tilde.l2_norm();
        assert!(div < 1e-10, "relative divergence {div:.2e}");
    }

    #[test]
    fn duhamel_reconstruction_recovers_w1() {
        // joint trajectory of both systems; w1 = Pw - u_tilde computed two
        // ways: directly, and by heat-kernel Duhamel over eval_h_terms
        let g = grid(12);
        let bank = DyadicFilterBank::new(&g);
        let params = test_params();
        let eps = 0.4;
        let f = make_force(
            &g,
            &bank,
            &ForceSpec {
                seed: 41,
                amplitude: 0.02,
                band: (0, 1),
            },
        )
        .unwrap();
        let pair = solve_compressible_stationary(
            &bank,
            &f,
            eps,
            &params,
            CompressibleSolveOptions {
                tol: 1e-12,
                j_cut: bank.j_max() + 1,
                init: None,
            },
        )
        .unwrap();
        let inc = solve_incompressible_stationary(&bank, &f, &params, 1e-12).unwrap();
        let state0 = small_state(&g, 43, 0.02);
        // matched initial data: u(0) = P v(0) => u_tilde(0) = P(v* + w) - u*
        let mut ut0 = project_solenoidal(&pair.v_star);
        ut0.axpy(1.0, &project_solenoidal(&state0.w));
        ut0.axpy(-1.0, &inc.u_star);

        let t_end = 0.5;
        let times: Vec<f64> = (0..=40).map(|k| t_end * k as f64 / 40.0).collect();
        let opts = StepOptions {
            atol: 1e-11,
            rtol: 1e-9,
            ..StepOptions::default()
        };
        let mut comp_snaps = Vec::new();
        let mut sys = CompressibleSystem::perturbation(&g, &pair, eps, &params);
        sys.integrate(state0.clone(), t_end, opts, &times, |s| {
            comp_snaps.push(s.clone())
        })
        .unwrap();
        let mut inc_snaps = Vec::new();
        let mut isys = IncompressibleSystem::new(&g, &inc.u_star, &params);
        isys.integrate(
            IncompressibleState {
                u_tilde: ut0.clone(),
                t: 0.0,
            },
            t_end,
            opts,
            &times,
            |s| inc_snaps.push(s.clone()),
        )
        .unwrap();
        assert_eq!(comp_snaps.len(), times.len());
        assert_eq!(inc_snaps.len(), times.len());

        let ph_snaps: Vec<(f64, SpectralField)> = comp_snaps
            .iter()
            .zip(&inc_snaps)
            .map(|(cs, is)| {
                let pw = project_solenoidal(&cs.w);
                let qw = project_gradient(&cs.w);
                let mut w1 = pw;
                w1.axpy(-1.0, &is.u_tilde);
                let h = eval_h_terms(
                    &w1,
                    &qw,
                    &cs.sigma,
                    &pair.b_star,
                    &pair.v_star,
                    &is.u_tilde,
                    &inc.u_star,
                    eps,
                    &params,
                )
                .unwrap();
                (cs.t, project_solenoidal(&h))
            })
            .collect();
        let mut w1_0 = project_solenoidal(&comp_snaps[0].w);
        w1_0.axpy(-1.0, &inc_snaps[0].u_tilde);
        let rec = reconstruct_w1(&ph_snaps, &w1_0, params.mu / params.rho_inf);
        let mut direct = project_solenoidal(&comp_snaps.last().unwrap().w);
        direct.axpy(-1.0, &inc_snaps.last().unwrap().u_tilde);
        let mut d = rec;
        d.axpy(-1.0, &direct);
        let tol = 10.0 * (1e-11 + 1e-9 * direct.l2_norm()).max(1e-11)
            + 1e-2 * (t_end / 40.0) * (t_end / 40.0); // trapezoid remainder
        assert!(
            d.l2_norm() < tol,
            "duhamel gap {:.3e} vs tol {:.3e}",
            d.l2_norm(),
            tol
        );
    }
}
