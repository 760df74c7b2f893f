//! Physical parameters and the derived constants used across the solvers.
//!
//! Two viscosity combinations matter and they differ by a factor 2: the
//! longitudinal total nu = 2 mu + mu' drives the stationary reformulation
//! (alpha, beta below), while the acoustic damping coefficient is
//! mu0 = mu + mu'/2 (so that the symbol's entry is -2 mu0 xi (x) xi).
//! Keeping both names separate avoids the silent factor-2 bug.

use crate::error::{LabError, Result};
use serde::{Deserialize, Serialize};

/// Barotropic pressure. The default is the quadratic law P = rho^2/2, whose
/// derivative P' = rho is linear (so all P''-composition terms vanish
/// identically - tests exercise them under the gamma law instead).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PressureLaw {
    Quadratic,
    Gamma { a: f64, gamma_ad: f64 },
}

impl PressureLaw {
    pub fn p_prime(&self, rho: f64) -> f64 {
        match *self {
            PressureLaw::Quadratic => rho,
            PressureLaw::Gamma { a, gamma_ad } => a * gamma_ad * rho.powf(gamma_ad - 1.0),
        }
    }
}

impl Default for PressureLaw {
    fn default() -> Self {
        PressureLaw::Quadratic
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub mu: f64,
    pub mu_prime: f64,
    pub rho_inf: f64,
    #[serde(default)]
    pub pressure_law: PressureLaw,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        PhysicalParams {
            mu: 1.0,
            mu_prime: 0.0,
            rho_inf: 1.0,
            pressure_law: PressureLaw::Quadratic,
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(LabError::config(format!("shear viscosity mu = {} must be > 0", self.mu)));
        }
        if 2.0 * self.mu / 3.0 + self.mu_prime < 0.0 {
            return Err(LabError::config(format!(
                "bulk condition 2mu/3 + mu' = {} must be >= 0",
                2.0 * self.mu / 3.0 + self.mu_prime
            )));
        }
        if !(self.rho_inf > 0.0) {
            return Err(LabError::config(format!(
                "reference density rho_inf = {} must be > 0",
                self.rho_inf
            )));
        }
        if !(self.p_prime_inf() > 0.0) {
            return Err(LabError::config(format!(
                "sound speed squared P'(rho_inf) = {} must be > 0",
                self.p_prime_inf()
            )));
        }
        Ok(())
    }

    pub fn p_prime_inf(&self) -> f64 {
        self.pressure_law.p_prime(self.rho_inf)
    }

    /// Longitudinal total viscosity 2 mu + mu'.
    pub fn nu(&self) -> f64 {
        2.0 * self.mu + self.mu_prime
    }

    /// Acoustic damping coefficient mu + mu'/2 = nu/2.
    pub fn mu0(&self) -> f64 {
        self.mu + 0.5 * self.mu_prime
    }

    /// alpha = nu / (P'(rho_inf) rho_inf), the inner-iteration weight of the
    /// stationary density equation.
    pub fn alpha(&self) -> f64 {
        self.nu() / (self.p_prime_inf() * self.rho_inf)
    }

    /// beta = P'(rho_inf) / nu, the density-to-velocity coupling.
    pub fn beta(&self) -> f64 {
        self.p_prime_inf() / self.nu()
    }

    /// gamma = P'(rho_inf)^{1/2}, the sound-speed factor.
    pub fn gamma(&self) -> f64 {
        self.p_prime_inf().sqrt()
    }

    /// gamma0 = P'(rho_inf) / rho_inf, the pressure-gradient coefficient of
    /// the perturbation system.
    pub fn gamma0(&self) -> f64 {
        self.p_prime_inf() / self.rho_inf
    }

    /// gamma1 = P'(rho_inf) / rho_inf^2, the energy symmetrizer weight.
    pub fn gamma1(&self) -> f64 {
        self.p_prime_inf() / (self.rho_inf * self.rho_inf)
    }

    /// gamma2 = P'(rho_inf)^{1/2} / rho_inf, the symmetrized-state density
    /// weight V = (gamma2 sigma, Qw).
    pub fn gamma2(&self) -> f64 {
        self.p_prime_inf().sqrt() / self.rho_inf
    }

    /// Effective Mach parameter of the symmetrized system: the acoustic
    /// propagator for (gamma2 sigma, Qw) runs at eps/gamma.
    pub fn eps_eff(&self, eps: f64) -> f64 {
        eps / self.gamma()
    }
}
