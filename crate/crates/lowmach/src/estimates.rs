//! Empirical constants for the bilinear product, commutator, and
//! composition estimates.
//!
//! Each inequality is probed as a ratio LHS/RHS over an ensemble of random
//! band-limited fields. None of the constants is quantified analytically,
//! so "the estimate holds" is witnessed operationally: the ensemble maximum
//! must stay essentially flat when the grid resolution doubles. A constant
//! that grows with n would mean the bound is secretly borrowing from the
//! frequency truncation.
//!
//! Ensemble law: coefficients are i.i.d. complex Gaussian with per-mode
//! deviation |xi|^{-(s+3/2)} on the interior dyadic shells (two shells of
//! margin at both ends), conjugate-symmetrized. That places the data on the
//! boundary of B^s_{2,inf} with every retained scale active.

use crate::besov::{besov_norm, block_contributions, combine, NormSpec};
use crate::datagen::{random_band_field, seeded_rng};
use crate::error::{LabError, Result};
use crate::field::{mul_scalar, phys_lp_norm, SpectralField};
use crate::multiplier::gradient;
use crate::paley::DyadicFilterBank;
use crate::params::PressureLaw;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

/// Ratio ensemble for one inequality at one resolution. `ratios` stays
/// in memory for diagnostics; the serialized record carries the summary
/// fields only.
#[derive(Clone, Debug, Serialize)]
pub struct RatioReport {
    pub lemma: String,
    pub params: serde_json::Value,
    #[serde(skip)]
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub resolution_growth: Option<f64>,
    pub seed: u64,
    pub n: usize,
}

impl RatioReport {
    pub fn new(
        lemma: &str,
        params: serde_json::Value,
        ratios: Vec<f64>,
        seed: u64,
        n: usize,
    ) -> Result<RatioReport> {
        if let Some(bad) = ratios.iter().find(|r| !r.is_finite() || **r < 0.0) {
            return Err(LabError::numerics(format!(
                "ratio {bad} in the {lemma} ensemble is not finite and nonnegative"
            )));
        }
        let max_ratio = ratios.iter().fold(0.0, |a: f64, &b| a.max(b));
        Ok(RatioReport {
            lemma: lemma.to_string(),
            params,
            ratios,
            max_ratio,
            resolution_growth: None,
            seed,
            n,
        })
    }

    /// Record max_ratio(self) / max_ratio(coarse), the grid-doubling growth
    /// factor this report is judged by.
    pub fn record_growth(&mut self, coarse: &RatioReport) -> Result<f64> {
        if self.lemma != coarse.lemma {
            return Err(LabError::config(format!(
                "growth compares {} against {}",
                self.lemma, coarse.lemma
            )));
        }
        if coarse.max_ratio == 0.0 {
            return Err(LabError::numerics(
                "coarse ensemble maximum is zero; growth undefined",
            ));
        }
        let g = self.max_ratio / coarse.max_ratio;
        self.resolution_growth = Some(g);
        Ok(g)
    }
}

/// Interior shells used for ensemble draws: two dyadic margins at each end
/// keep the data away from both the mean cutoff and the dealias edge. Tiny
/// banks collapse to their middle shell.
fn ensemble_band(bank: &DyadicFilterBank) -> (i32, i32) {
    let (lo, hi) = (bank.j_min() + 2, bank.j_max() - 2);
    if lo > hi {
        let mid = (bank.j_min() + bank.j_max()) / 2;
        (mid, mid)
    } else {
        (lo, hi)
    }
}

/// LHS/RHS with an explicit noise floor for the structurally-zero-RHS case
/// (constant h, identical composition arguments, zero data).
fn ratio(lhs: f64, rhs: f64, floor: f64) -> Result<f64> {
    if rhs > 0.0 {
        Ok(lhs / rhs)
    } else if lhs <= floor {
        Ok(0.0)
    } else {
        Err(LabError::numerics(format!(
            "left side {lhs} against a vanishing right side"
        )))
    }
}

fn harmonic_sum(r1: f64, r2: f64) -> f64 {
    let inv = |r: f64| if r.is_infinite() { 0.0 } else { 1.0 / r };
    let s = inv(r1) + inv(r2);
    if s == 0.0 {
        f64::INFINITY
    } else {
        1.0 / s
    }
}

fn holder_dual(p: f64) -> f64 {
    if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

// ---------------------------------------------------------------------
// products

fn bi0_specs(s1: f64, s2: f64, r1: f64, r2: f64) -> Result<(NormSpec, NormSpec, NormSpec)> {
    if s1 >= 1.5 || s2 >= 1.5 {
        return Err(LabError::config(format!(
            "product estimate needs s1, s2 < 3/2; got ({s1}, {s2})"
        )));
    }
    if s1 + s2 <= 0.0 {
        return Err(LabError::config(format!(
            "product estimate needs s1 + s2 > 0; got {}",
            s1 + s2
        )));
    }
    // 1/r = 1/r1 + 1/r2; NormSpec rejects combinations leaving {1, 2, inf}
    let r = harmonic_sum(r1, r2);
    Ok((
        NormSpec::new(s1 + s2 - 1.5, 2.0, r)?,
        NormSpec::new(s1, 2.0, r1)?,
        NormSpec::new(s2, 2.0, r2)?,
    ))
}

/// One-pair ratio for the L2-based product estimate
/// ||uv||_{B^{s1+s2-3/2}_{2,r}} <= C ||u||_{B^{s1}_{2,r1}} ||v||_{B^{s2}_{2,r2}}.
pub fn product_ratio_bi0(
    bank: &DyadicFilterBank,
    u: &SpectralField,
    v: &SpectralField,
    s1: f64,
    s2: f64,
    r1: f64,
    r2: f64,
) -> Result<f64> {
    let (wspec, uspec, vspec) = bi0_specs(s1, s2, r1, r2)?;
    let w = mul_scalar(u, v);
    ratio(
        besov_norm(&w, bank, wspec),
        besov_norm(u, bank, uspec) * besov_norm(v, bank, vspec),
        0.0, // uv vanishes identically when either factor does
    )
}

pub fn check_product_bi0(
    bank: &DyadicFilterBank,
    s1: f64,
    s2: f64,
    r1: f64,
    r2: f64,
    count: usize,
    seed: u64,
) -> Result<RatioReport> {
    bi0_specs(s1, s2, r1, r2)?; // fail before spawning workers
    let band = ensemble_band(bank);
    let ratios = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded_rng(seed, i as u64);
            let u = random_band_field(bank.grid(), 1, band, s1, &mut rng);
            let v = random_band_field(bank.grid(), 1, band, s2, &mut rng);
            product_ratio_bi0(bank, &u, &v, s1, s2, r1, r2)
        })
        .collect::<Result<Vec<_>>>()?;
    RatioReport::new(
        "bi0",
        json!({"s1": s1, "s2": s2, "r1": r1, "r2": r2}),
        ratios,
        seed,
        bank.grid().n(),
    )
}

/// The two mixed-integrability product estimates. Bi1 lands in the dual
/// space: ||uv||_{B^{s1+s2-3/p}_{p',r}} <= C ||u||_{B^{s1}_{2,r}} ||v||_{B^{s2}_{2,inf}}
/// under s1, s2 < 3/p. Bi2 keeps the base exponent:
/// ||uv||_{B^{s1+s2-3/2}_{p,r}} <= C ||u||_{B^{s1}_{p,r}} ||v||_{B^{s2}_{2,inf}}
/// under s1 < 3/p, s2 < 3/2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProductVariant {
    Bi1,
    Bi2,
}

fn bi12_specs(
    s1: f64,
    s2: f64,
    p: f64,
    r: f64,
    variant: ProductVariant,
) -> Result<(NormSpec, NormSpec, NormSpec)> {
    if p < 2.0 {
        return Err(LabError::config(format!(
            "mixed product estimate needs p >= 2; got {p}"
        )));
    }
    let three_over_p = if p.is_infinite() { 0.0 } else { 3.0 / p };
    if s1 + s2 <= 0.0 {
        return Err(LabError::config(format!(
            "product estimate needs s1 + s2 > 0; got {}",
            s1 + s2
        )));
    }
    let s2_cap = match variant {
        ProductVariant::Bi1 => three_over_p,
        ProductVariant::Bi2 => 1.5,
    };
    if s1 >= three_over_p || s2 >= s2_cap {
        return Err(LabError::config(format!(
            "{variant:?} needs s1 < 3/p and s2 < {s2_cap}; got ({s1}, {s2}) at p = {p}"
        )));
    }
    match variant {
        ProductVariant::Bi1 => Ok((
            NormSpec::new(s1 + s2 - three_over_p, holder_dual(p), r)?,
            NormSpec::new(s1, 2.0, r)?,
            NormSpec::new(s2, 2.0, f64::INFINITY)?,
        )),
        ProductVariant::Bi2 => Ok((
            NormSpec::new(s1 + s2 - 1.5, p, r)?,
            NormSpec::new(s1, p, r)?,
            NormSpec::new(s2, 2.0, f64::INFINITY)?,
        )),
    }
}

pub fn product_ratio_bi1_bi2(
    bank: &DyadicFilterBank,
    u: &SpectralField,
    v: &SpectralField,
    s1: f64,
    s2: f64,
    p: f64,
    r: f64,
    variant: ProductVariant,
) -> Result<f64> {
    let (wspec, uspec, vspec) = bi12_specs(s1, s2, p, r, variant)?;
    let w = mul_scalar(u, v);
    ratio(
        besov_norm(&w, bank, wspec),
        besov_norm(u, bank, uspec) * besov_norm(v, bank, vspec),
        0.0,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn check_product_bi1_bi2(
    bank: &DyadicFilterBank,
    s1: f64,
    s2: f64,
    p: f64,
    r: f64,
    variant: ProductVariant,
    count: usize,
    seed: u64,
) -> Result<RatioReport> {
    bi12_specs(s1, s2, p, r, variant)?;
    let band = ensemble_band(bank);
    let ratios = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded_rng(seed, i as u64);
            let u = random_band_field(bank.grid(), 1, band, s1, &mut rng);
            let v = random_band_field(bank.grid(), 1, band, s2, &mut rng);
            product_ratio_bi1_bi2(bank, &u, &v, s1, s2, p, r, variant)
        })
        .collect::<Result<Vec<_>>>()?;
    let name = match variant {
        ProductVariant::Bi1 => "bi1",
        ProductVariant::Bi2 => "bi2",
    };
    RatioReport::new(
        name,
        json!({"s1": s1, "s2": s2, "p": p, "r": r}),
        ratios,
        seed,
        bank.grid().n(),
    )
}

// ---------------------------------------------------------------------
// commutator

fn partial(f: &SpectralField, k: usize) -> SpectralField {
    assert_eq!(f.components(), 1);
    let grid = f.grid().clone();
    let mut out = f.clone();
    out.comp_mut(0)
        .par_iter_mut()
        .enumerate()
        .for_each(|(i, z)| {
            *z *= Complex64::new(0.0, grid.xi(i)[k]);
        });
    out
}

/// One-pair ratio for the filter-advection commutator estimate: the l^r
/// aggregate of 2^{js} ||chi_j(h d_k u) - h d_k(chi_j u)||_{L2} over j_set
/// against ||grad h||_{B^{3/2}_{2,1}} ||u||_{B^s_{2,r}}. All three
/// directions k are measured; the worst one is reported.
pub fn commutator_ratio(
    bank: &DyadicFilterBank,
    h: &SpectralField,
    u: &SpectralField,
    j_set: &[i32],
    s: f64,
    r: f64,
) -> Result<f64> {
    if !(-1.5 < s && s < 2.5) {
        return Err(LabError::config(format!(
            "commutator estimate needs -3/2 < s < 5/2; got {s}"
        )));
    }
    let uspec = NormSpec::new(s, 2.0, r)?;
    if let Some(j) = j_set
        .iter()
        .find(|j| **j < bank.j_min() || **j > bank.j_max())
    {
        return Err(LabError::config(format!(
            "shell {j} outside the bank range [{}, {}]",
            bank.j_min(),
            bank.j_max()
        )));
    }
    let u_norm = besov_norm(u, bank, uspec);
    let rhs = besov_norm(&gradient(h), bank, NormSpec::new(1.5, 2.0, 1.0)?) * u_norm;
    let mut worst = 0.0f64;
    for k in 0..3 {
        let h_du = mul_scalar(h, &partial(u, k));
        let parts = j_set.iter().map(|&j| {
            let mut d = bank.dyadic_block(&h_du, j);
            d.axpy(-1.0, &mul_scalar(h, &partial(&bank.dyadic_block(u, j), k)));
            (2.0f64).powi(j).powf(s) * d.l2_norm()
        });
        worst = worst.max(combine(parts, r));
    }
    // constant h: rhs is exactly zero while the commutator carries only
    // transform roundoff — treat anything 1e-9 below the data as zero
    ratio(worst, rhs, 1e-9 * u_norm)
}

pub fn check_commutator(
    bank: &DyadicFilterBank,
    s: f64,
    r: f64,
    count: usize,
    seed: u64,
) -> Result<RatioReport> {
    if !(-1.5 < s && s < 2.5) {
        return Err(LabError::config(format!(
            "commutator estimate needs -3/2 < s < 5/2; got {s}"
        )));
    }
    NormSpec::new(s, 2.0, r)?;
    let band = ensemble_band(bank);
    let j_set: Vec<i32> = (bank.j_min()..=bank.j_max()).collect();
    let ratios = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded_rng(seed, i as u64);
            // one draw serves as both the transported field and the
            // transporting coefficient — the pinned suite configuration
            let f = random_band_field(bank.grid(), 1, band, s, &mut rng);
            commutator_ratio(bank, &f, &f, &j_set, s, r)
        })
        .collect::<Result<Vec<_>>>()?;
    RatioReport::new(
        "commu",
        json!({"s": s, "r": r}),
        ratios,
        seed,
        bank.grid().n(),
    )
}

// ---------------------------------------------------------------------
// composition

/// Fraction of squared L2 mass a pointwise composition may shed beyond the
/// resolved band before the measurement is meaningless.
const COMPOSITION_BAND_BUDGET: f64 = 0.1;

/// Small-data amplitude for composition ensembles: keeps 1 + zeta away from
/// the pressure-law singularity and the harmonic tail inside the budget.
const SMALL_DATA_AMPLITUDE: f64 = 0.2;

/// Pointwise phi(u) - phi(v), transformed and dealiased, with a check that
/// the truncation did not swallow the composition.
fn compose_diff<F>(phi: &F, u: &SpectralField, v: &SpectralField) -> Result<SpectralField>
where
    F: Fn(f64) -> f64 + Sync,
{
    assert_eq!(u.components(), 1);
    assert_eq!(v.components(), 1);
    let grid = u.grid().clone();
    let pu = u.to_physical(0);
    let pv = v.to_physical(0);
    let vals: Vec<Complex64> = pu
        .par_iter()
        .zip(pv.par_iter())
        .map(|(a, b)| Complex64::new(phi(a.re) - phi(b.re), 0.0))
        .collect();
    let full = phys_lp_norm(&grid, &vals, 1, 2.0);
    let w = SpectralField::from_physical(&grid, 1, vals);
    let kept = w.l2_norm();
    let shed = (full * full - kept * kept).max(0.0).sqrt();
    if shed > COMPOSITION_BAND_BUDGET * full {
        return Err(LabError::numerics(format!(
            "composition sheds {:.0}% of its L2 mass beyond the resolved band",
            1e2 * shed / full
        )));
    }
    Ok(w)
}

/// ||(u, v)||_{B^{3/2}_{2,1}}: the two fields enter each block euclidean,
/// as one two-component field would.
fn pair_norm(bank: &DyadicFilterBank, u: &SpectralField, v: &SpectralField) -> f64 {
    let spec = NormSpec::new(1.5, 2.0, 1.0).unwrap();
    block_contributions(u, bank, spec)
        .iter()
        .zip(block_contributions(v, bank, spec).iter())
        .map(|((_, a), (_, b))| a.hypot(*b))
        .sum()
}

/// One-pair ratio for the composition difference estimate
/// ||phi(u) - phi(v)||_{B^s_{2,r}} <= C (1 + ||(u,v)||_{B^{3/2}_{2,1}}) ||u - v||_{B^s_{2,r}}.
pub fn composition_ratio<F>(
    bank: &DyadicFilterBank,
    phi: &F,
    u: &SpectralField,
    v: &SpectralField,
    s: f64,
    r: f64,
) -> Result<f64>
where
    F: Fn(f64) -> f64 + Sync,
{
    if !((-1.5..1.5).contains(&s) || (s == 1.5 && r == 1.0)) {
        return Err(LabError::config(format!(
            "composition estimate needs -3/2 <= s < 3/2, or s = 3/2 with r = 1; got (s, r) = ({s}, {r})"
        )));
    }
    let spec = NormSpec::new(s, 2.0, r)?;
    let w = compose_diff(phi, u, v)?;
    let lhs = besov_norm(&w, bank, spec);
    let mut diff = u.clone();
    diff.axpy(-1.0, v);
    let rhs = (1.0 + pair_norm(bank, u, v)) * besov_norm(&diff, bank, spec);
    // u = v: the pointwise difference is computed before any transform,
    // so both sides vanish exactly
    ratio(lhs, rhs, 0.0)
}

pub fn check_composition<F>(
    bank: &DyadicFilterBank,
    phi: &F,
    s: f64,
    r: f64,
    count: usize,
    seed: u64,
) -> Result<RatioReport>
where
    F: Fn(f64) -> f64 + Sync,
{
    if !((-1.5..1.5).contains(&s) || (s == 1.5 && r == 1.0)) {
        return Err(LabError::config(format!(
            "composition estimate needs -3/2 <= s < 3/2, or s = 3/2 with r = 1; got (s, r) = ({s}, {r})"
        )));
    }
    NormSpec::new(s, 2.0, r)?;
    let band = ensemble_band(bank);
    let small = |mut f: SpectralField| {
        let sup = phys_lp_norm(f.grid(), &f.to_physical_all(), 1, f64::INFINITY);
        if sup > 0.0 {
            f.scale(SMALL_DATA_AMPLITUDE / sup);
        }
        f
    };
    let ratios = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded_rng(seed, i as u64);
            let u = small(random_band_field(bank.grid(), 1, band, s, &mut rng));
            let v = small(random_band_field(bank.grid(), 1, band, s, &mut rng));
            composition_ratio(bank, phi, &u, &v, s, r)
        })
        .collect::<Result<Vec<_>>>()?;
    RatioReport::new(
        "compos",
        json!({"s": s, "r": r}),
        ratios,
        seed,
        bank.grid().n(),
    )
}

/// 1/(rho_inf + zeta): the specific-volume composition the momentum
/// equation divides by.
pub fn reciprocal_density(rho_inf: f64) -> impl Fn(f64) -> f64 + Sync + Copy {
    move |z| 1.0 / (rho_inf + z)
}

/// P'(rho_inf + zeta)/(rho_inf + zeta): the squared-sound-speed composition
/// multiplying the density gradient.
pub fn sound_speed(law: PressureLaw, rho_inf: f64) -> impl Fn(f64) -> f64 + Sync + Copy {
    move |z| law.p_prime(rho_inf + z) / (rho_inf + z)
}
