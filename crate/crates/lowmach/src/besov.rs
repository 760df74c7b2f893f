//! Homogeneous Besov and Sobolev norms measured on the grid.
//!
//! The Besov norm is assembled the literal way: filter into dyadic blocks,
//! transform each block to physical space, take the rectangle-rule L^p norm
//! there, weight by 2^{js} and combine over j in l^r. This keeps the p != 2
//! cases honest (they are genuine mixed-space quantities, not coefficient
//! sums). The mean mode never enters: every block multiplier vanishes at
//! xi = 0, as befits homogeneous spaces on the torus.

use crate::error::{LabError, Result};
use crate::field::{phys_lp_norm, SpectralField};
use crate::paley::DyadicFilterBank;
use serde::{Deserialize, Serialize};

/// Besov index triple (s, p, r). Indices are plain floats with infinity
/// spelled "inf" in JSON.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub s: f64,
    #[serde(with = "ext_index")]
    pub p: f64,
    #[serde(with = "ext_index")]
    pub r: f64,
}

impl NormSpec {
    /// Validated constructor: s in [-4, 6], p in {1, 4/3, 2, 4, inf},
    /// r in {1, 2, inf}. The p-list is what the physical-space quadrature
    /// can certify (each exponent together with its dual, which the product
    /// estimates land in); the s-range keeps 2^{js} weights within f64
    /// comfort on every grid.
    pub fn new(s: f64, p: f64, r: f64) -> Result<NormSpec> {
        let spec = NormSpec { s, p, r };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(-4.0..=6.0).contains(&self.s) {
            return Err(LabError::config(format!(
                "regularity index s = {} outside [-4, 6]",
                self.s
            )));
        }
        if !(self.p == 1.0
            || self.p == 4.0 / 3.0
            || self.p == 2.0
            || self.p == 4.0
            || self.p.is_infinite())
        {
            return Err(LabError::config(format!(
                "integrability index p = {} not one of 1, 4/3, 2, 4, inf",
                self.p
            )));
        }
        if !(self.r == 1.0 || self.r == 2.0 || self.r.is_infinite()) {
            return Err(LabError::config(format!(
                "summation index r = {} not one of 1, 2, inf",
                self.r
            )));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        let fmt = |x: f64| {
            if x.is_infinite() {
                "inf".to_string()
            } else if x == x.trunc() {
                format!("{}", x as i64)
            } else {
                format!("{x}")
            }
        };
        format!("B^{}_{{{},{}}}", self.s, fmt(self.p), fmt(self.r))
    }
}

/// serde helpers mapping f64::INFINITY <-> "inf".
pub mod ext_index {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if x.is_infinite() {
            ser.serialize_str("inf")
        } else {
            ser.serialize_f64(*x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Word(String),
        }
        match Raw::deserialize(de)? {
            Raw::Num(x) => Ok(x),
            Raw::Word(w) if w == "inf" => Ok(f64::INFINITY),
            Raw::Word(w) => Err(de::Error::custom(format!("expected number or \"inf\", got {w:?}"))),
        }
    }
}

/// Per-block contributions 2^{js} ||Delta_j u||_{L^p}, j ascending. Blocks
/// below 1e-300 are reported as zero rather than denormal noise.
pub fn block_contributions(
    f: &SpectralField,
    bank: &DyadicFilterBank,
    spec: NormSpec,
) -> Vec<(i32, f64)> {
    (bank.j_min()..=bank.j_max())
        .map(|j| {
            let blk = bank.dyadic_block(f, j);
            let lp = if spec.p == 2.0 {
                blk.l2_norm()
            } else {
                phys_lp_norm(f.grid(), &blk.to_physical_all(), f.components(), spec.p)
            };
            let a = (2.0f64).powi(j).powf(spec.s) * lp;
            (j, if a < 1e-300 { 0.0 } else { a })
        })
        .collect()
}

pub fn besov_norm(f: &SpectralField, bank: &DyadicFilterBank, spec: NormSpec) -> f64 {
    let parts = block_contributions(f, bank, spec);
    combine(parts.iter().map(|&(_, a)| a), spec.r)
}

pub(crate) fn combine(parts: impl Iterator<Item = f64>, r: f64) -> f64 {
    if r == 1.0 {
        parts.sum()
    } else if r == 2.0 {
        parts.map(|a| a * a).sum::<f64>().sqrt()
    } else {
        parts.fold(0.0, f64::max)
    }
}

/// Homogeneous Sobolev norm (L^{3/2} sum_{xi != 0} |xi|^{2s} |u_hat|^2)^{1/2},
/// all components together.
pub fn sobolev_norm(f: &SpectralField, s: f64) -> f64 {
    let grid = f.grid();
    let n3 = grid.mode_count();
    let mut sq = 0.0;
    for c in 0..f.components() {
        let comp = f.comp(c);
        // index 0 is the unique xi = 0 mode; skipping it drops the mean
        for i in 1..n3 {
            let w = grid.xi_norm_sq(i).powf(s);
            sq += w * comp[i].norm_sqr();
        }
    }
    grid.len().powf(1.5) * sq.sqrt()
}

/// ||Delta_j u||_{L^2} computed spectrally (no physical transform).
pub fn block_l2(f: &SpectralField, bank: &DyadicFilterBank, j: i32) -> f64 {
    let tbl = bank.block_table(j);
    let n3 = f.grid().mode_count();
    let mut sq = 0.0;
    for c in 0..f.components() {
        let comp = f.comp(c);
        for i in 0..n3 {
            let w = tbl[i];
            if w != 0.0 {
                sq += w * w * comp[i].norm_sqr();
            }
        }
    }
    f.grid().len().powf(1.5) * sq.sqrt()
}
