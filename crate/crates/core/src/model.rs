//! Dimensionless lattice model, unit conversion, the accelerated frame
//! coordinate and the gauge phase linking the lab wavefunction to the
//! frame function `u(xi, t)`.
//!
//! After conversion `hbar = 1`; lengths are in units of `1/k_L`, times in
//! `hbar/E_r` and energies in the recoil energy `E_r = hbar^2 k_L^2 / (2m)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CODATA 2018 values used by the SI conversion.
pub mod constants {
    /// Reduced Planck constant in J s.
    pub const HBAR: f64 = 1.054_571_817e-34;
    /// Atomic mass unit in kg.
    pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
    /// Bohr radius in m.
    pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
    /// Mass of rubidium-87 in atomic mass units.
    pub const RB87_MASS_AMU: f64 = 86.909_180_527;
}

/// Dimensional inputs (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalInputs {
    /// kg
    pub atomic_mass: f64,
    /// 1/m
    pub wave_number_kl: f64,
    /// m/s^2, any sign
    pub acceleration: f64,
    /// J, any sign
    pub potential_depth: f64,
    /// m; negative for attractive interactions
    pub scattering_length: f64,
    /// m
    pub radial_length: f64,
}

impl PhysicalInputs {
    pub fn validate(&self) -> Result<()> {
        let strictly_positive = [
            ("atomic_mass", self.atomic_mass),
            ("wave_number_kl", self.wave_number_kl),
            ("radial_length", self.radial_length),
        ];
        for (name, value) in strictly_positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be finite and > 0, got {value}")));
            }
        }
        let finite = [
            ("acceleration", self.acceleration),
            ("potential_depth", self.potential_depth),
            ("scattering_length", self.scattering_length),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be finite, got {value}")));
            }
        }
        Ok(())
    }

    /// Recoil energy `hbar^2 k_L^2 / (2m)` in J.
    pub fn recoil_energy(&self) -> f64 {
        constants::HBAR.powi(2) * self.wave_number_kl.powi(2) / (2.0 * self.atomic_mass)
    }

    /// Constant force `F = m a` in N.
    pub fn force(&self) -> f64 {
        self.atomic_mass * self.acceleration
    }
}

/// Chemical potential and mean atoms per well, tied by `mu = g1d N' + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Filling {
    ChemicalPotential(f64),
    AtomsPerWell(f64),
}

/// Dimensionless system parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeParams {
    /// Lattice depth, canonicalized to be non-negative.
    pub v0: f64,
    pub g1d: f64,
    pub alpha: f64,
    pub j0: f64,
    pub mu: Option<f64>,
    pub n_prime: Option<f64>,
    /// `pi/2` when the input depth was negative: `V0 cos(2 xi) = |V0| cos(2 (xi + pi/2))`.
    pub xi_offset: f64,
}

impl LatticeParams {
    /// Build parameters from one of `mu` / `N'`; the other is derived when
    /// `g1d != 0`.
    pub fn new(v0: f64, g1d: f64, alpha: f64, j0: f64, filling: Option<Filling>) -> Result<Self> {
        for (name, value) in [("v0", v0), ("g1d", g1d), ("alpha", alpha), ("j0", j0)] {
            if !value.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be finite, got {value}")));
            }
        }
        let (mu, n_prime) = match filling {
            None => (None, None),
            Some(Filling::ChemicalPotential(mu)) => {
                let n = if g1d != 0.0 { Some((mu - 1.0) / g1d) } else { None };
                (Some(mu), n)
            }
            Some(Filling::AtomsPerWell(n)) => (Some(g1d * n + 1.0), Some(n)),
        };
        let (v0, xi_offset) = if v0 < 0.0 { (-v0, PI / 2.0) } else { (v0, 0.0) };
        Ok(Self {
            v0,
            g1d,
            alpha,
            j0,
            mu,
            n_prime,
            xi_offset,
        })
    }

    /// Resolve from optional `mu` and `N'`; giving both is accepted only when
    /// they agree.
    pub fn from_optional(
        v0: f64,
        g1d: f64,
        alpha: f64,
        j0: f64,
        mu: Option<f64>,
        n_prime: Option<f64>,
    ) -> Result<Self> {
        let filling = match (mu, n_prime) {
            (Some(mu), Some(n)) => {
                let implied = g1d * n + 1.0;
                if (implied - mu).abs() > 1e-12 * mu.abs().max(1.0) {
                    return Err(Error::Conflict(format!(
                        "mu = {mu} disagrees with mu = g1d N' + 1 = {implied}"
                    )));
                }
                Some(Filling::ChemicalPotential(mu))
            }
            (Some(mu), None) => Some(Filling::ChemicalPotential(mu)),
            (None, Some(n)) => Some(Filling::AtomsPerWell(n)),
            (None, None) => None,
        };
        let mut params = Self::new(v0, g1d, alpha, j0, filling)?;
        if let (Some(_), Some(n)) = (mu, n_prime) {
            params.n_prime = Some(n);
        }
        Ok(params)
    }

    /// Depth with its original sign restored.
    pub fn signed_v0(&self) -> f64 {
        if self.xi_offset != 0.0 {
            -self.v0
        } else {
            self.v0
        }
    }

    /// Lattice potential `V0 cos(2 xi)` in the moving frame.
    pub fn lattice_potential(&self, xi: f64) -> f64 {
        self.v0 * (2.0 * (xi + self.xi_offset)).cos()
    }

    pub fn mu(&self) -> Result<f64> {
        self.mu
            .ok_or_else(|| Error::InvalidInput("chemical potential is unset".into()))
    }
}

/// Convert SI inputs to the dimensionless model; `J0` starts at zero.
pub fn to_dimensionless(inputs: &PhysicalInputs) -> Result<LatticeParams> {
    inputs.validate()?;
    let er = inputs.recoil_energy();
    let k = inputs.wave_number_kl;
    let alpha = 0.5 * k * inputs.acceleration * constants::HBAR.powi(2) / er.powi(2);
    let g1d = 4.0 * inputs.scattering_length / (k * inputs.radial_length.powi(2));
    let v0 = inputs.potential_depth / er;
    LatticeParams::new(v0, g1d, alpha, 0.0, None)
}

/// Quantities recovered from dimensionless parameters given the mass, wave
/// number and radial length that fixed the units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveredInputs {
    pub acceleration: f64,
    pub potential_depth: f64,
    pub scattering_length: f64,
}

/// Closed-form inverse of [`to_dimensionless`].
pub fn from_dimensionless(
    params: &LatticeParams,
    atomic_mass: f64,
    wave_number_kl: f64,
    radial_length: f64,
) -> RecoveredInputs {
    let er = constants::HBAR.powi(2) * wave_number_kl.powi(2) / (2.0 * atomic_mass);
    RecoveredInputs {
        acceleration: 2.0 * params.alpha * er.powi(2) / (wave_number_kl * constants::HBAR.powi(2)),
        potential_depth: params.signed_v0() * er,
        scattering_length: params.g1d * wave_number_kl * radial_length.powi(2) / 4.0,
    }
}

/// A lab point `(x, t)` together with its moving-frame coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramePoint {
    pub x: f64,
    pub t: f64,
    pub xi: f64,
}

impl FramePoint {
    /// Position in the lab recovered from the frame coordinate.
    pub fn lab_x(&self, alpha: f64) -> f64 {
        self.xi - alpha * self.t * self.t
    }

    /// Frame point for a given `xi` at time `t`.
    pub fn from_frame(xi: f64, t: f64, alpha: f64) -> Self {
        moving_frame(xi - alpha * t * t, t, alpha)
    }
}

/// `xi = x + alpha t^2`.
pub fn moving_frame(x: f64, t: f64, alpha: f64) -> FramePoint {
    FramePoint {
        x,
        t,
        xi: x + alpha * t * t,
    }
}

/// Phase multiplying `u(xi, t)` in the lab wavefunction of translation index `n`:
/// `-(alpha x t + alpha^2 t^3 / 3) - (mu + alpha n pi) t`.
pub fn gauge_phase(x: f64, t: f64, alpha: f64, n: u32, mu: f64) -> f64 {
    -(alpha * x * t + alpha * alpha * t.powi(3) / 3.0) - (mu + alpha * f64::from(n) * PI) * t
}
