//! The balanced family of exact stationary states
//! `phi = (A + iC) cos xi + (B + iD) sin xi`, its density, phase, current and
//! the accelerated flow it carries.
//!
//! The family solves `g1d |phi|^2 + V0 cos(2 xi) = mu - 1` together with
//! `phi'' = -phi`. Matching coefficients of `|phi|^2` gives
//!
//! ```text
//! g1d (A^2 + C^2)              = mu - V0 - 1
//! AB + CD                      = 0
//! g1d (B^2 + D^2 - A^2 - C^2)  = 2 V0
//! ```
//!
//! and the polar form `A + iC = r1 e^{i a}`, `B + iD = r2 e^{i (a +- pi/2)}`
//! covers every real solution.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral;

/// `hbar k_L / m` expressed in the dimensionless velocity unit `E_r / (hbar k_L)`.
pub const RECOIL_VELOCITY_SCALE: f64 = 2.0;

/// `mu = g1d N' + 1`.
pub fn chemical_potential(g1d: f64, n_prime: f64) -> Result<f64> {
    if g1d == 0.0 {
        return Err(Error::BalanceInfeasible(
            "g1d = 0 forces V0 = 0 and mu = 1 independently of N'".into(),
        ));
    }
    Ok(g1d * n_prime + 1.0)
}

/// Orientation of `B + iD` relative to `A + iC`; also the sign of `J0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilySign {
    Plus,
    Minus,
}

impl FamilySign {
    pub fn value(self) -> f64 {
        match self {
            FamilySign::Plus => 1.0,
            FamilySign::Minus => -1.0,
        }
    }
}

/// Which third coefficient relation to impose when building amplitudes.
///
/// `Printed` reproduces `g1d (B^2 + D^2 - A^2 - C^2) = V0`, which halves the
/// lattice modulation of the density and shifts its mean; it exists so the
/// discrepancy can be demonstrated, not for physics use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThirdRelation {
    Consistent,
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalancedSolution {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub mu: f64,
    pub g1d: f64,
    pub v0: f64,
    pub n_prime: f64,
    pub angle: f64,
    pub sign: FamilySign,
}

/// Exact balanced solution for `(g1d, V0, N')` and a family member `(angle, sign)`.
pub fn solve_balance(g1d: f64, v0: f64, n_prime: f64, angle: f64, sign: FamilySign) -> Result<BalancedSolution> {
    solve_balance_with(ThirdRelation::Consistent, g1d, v0, n_prime, angle, sign)
}

pub fn solve_balance_with(
    relation: ThirdRelation,
    g1d: f64,
    v0: f64,
    n_prime: f64,
    angle: f64,
    sign: FamilySign,
) -> Result<BalancedSolution> {
    let mu = chemical_potential(g1d, n_prime)?;
    let r1_sq = clamp_round_off((mu - 1.0 - v0) / g1d, n_prime);
    let r2_sq = match relation {
        ThirdRelation::Consistent => clamp_round_off((mu - 1.0 + v0) / g1d, n_prime),
        ThirdRelation::Printed => clamp_round_off(r1_sq + v0 / g1d, n_prime),
    };
    if r1_sq < 0.0 {
        return Err(Error::NoBalancedSolution(format!(
            "(mu - V0 - 1)/g1d = {r1_sq} < 0 (mu = {mu}, V0 = {v0}, g1d = {g1d})"
        )));
    }
    if r2_sq < 0.0 {
        return Err(Error::NoBalancedSolution(format!(
            "(mu + V0 - 1)/g1d = {r2_sq} < 0 (mu = {mu}, V0 = {v0}, g1d = {g1d})"
        )));
    }
    let (r1, r2) = (r1_sq.sqrt(), r2_sq.sqrt());
    let angle = angle.rem_euclid(2.0 * PI);
    let angle_b = angle + sign.value() * PI / 2.0;
    Ok(BalancedSolution {
        a: r1 * angle.cos(),
        c: r1 * angle.sin(),
        b: r2 * angle_b.cos(),
        d: r2 * angle_b.sin(),
        mu,
        g1d,
        v0,
        n_prime,
        angle,
        sign,
    })
}

fn clamp_round_off(r_sq: f64, scale: f64) -> f64 {
    if r_sq < 0.0 && r_sq > -1e-14 * scale.abs().max(1.0) {
        0.0
    } else {
        r_sq
    }
}

impl BalancedSolution {
    pub fn phi(&self, xi: f64) -> Complex64 {
        let (s, c) = xi.sin_cos();
        Complex64::new(self.a, self.c) * c + Complex64::new(self.b, self.d) * s
    }

    pub fn phi_prime(&self, xi: f64) -> Complex64 {
        let (s, c) = xi.sin_cos();
        -Complex64::new(self.a, self.c) * s + Complex64::new(self.b, self.d) * c
    }

    /// `|phi|^2` from the amplitudes.
    pub fn density(&self, xi: f64) -> f64 {
        self.phi(xi).norm_sqr()
    }

    /// `N' - (V0/g1d) cos(2 xi)`.
    pub fn exact_density(&self, xi: f64) -> f64 {
        self.n_prime - self.v0 / self.g1d * (2.0 * xi).cos()
    }

    /// Coefficient expansion of `|phi|^2` in `sin^2 xi` and `sin 2 xi`.
    pub fn expanded_density(&self, xi: f64) -> f64 {
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        let s = xi.sin();
        a * a + c * c + (b * b + d * d - a * a - c * c) * s * s + (a * b + c * d) * (2.0 * xi).sin()
    }

    /// Integration constant `J0 = theta' R^2 = AD - BC`.
    pub fn flow_constant(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    /// `arg phi`, in `(-pi, pi]`.
    pub fn phase(&self, xi: f64) -> f64 {
        self.phi(xi).arg()
    }

    /// Local current `Im(conj(phi) phi')`.
    pub fn current(&self, xi: f64) -> f64 {
        (self.phi(xi).conj() * self.phi_prime(xi)).im
    }

    pub fn flow_field(&self, alpha: f64) -> FlowField {
        FlowField {
            solution: *self,
            j0: self.flow_constant(),
            alpha,
        }
    }

    /// Max-norm residual of `mu phi + phi'' - (V0 cos 2xi + g1d |phi|^2) phi`
    /// on `n` points of `[0, 2 pi)`, with `phi''` from spectral differentiation.
    pub fn residual_stationary(&self, n: usize) -> Result<f64> {
        if n < 64 {
            return Err(Error::InvalidInput(format!("residual grid needs >= 64 points, got {n}")));
        }
        let xs = spectral::grid(n, 2.0 * PI);
        let phi: Vec<Complex64> = xs.iter().map(|&x| self.phi(x)).collect();
        let phi_xx = spectral::derivative(&phi, 2.0 * PI, 2);
        let residual = xs
            .iter()
            .zip(phi.iter().zip(&phi_xx))
            .map(|(&x, (&p, &pxx))| {
                let potential = self.v0 * (2.0 * x).cos() + self.g1d * p.norm_sqr();
                (p * self.mu + pxx - p * potential).norm()
            })
            .fold(0.0, f64::max);
        Ok(residual)
    }

    /// Tabulate `(xi, |phi|^2, theta, v, J)` at time `t` on `n` points of `[0, 2 pi)`.
    /// The phase is unwrapped along the grid.
    pub fn table(&self, alpha: f64, t: f64, n: usize) -> Vec<SolutionRow> {
        let flow = self.flow_field(alpha);
        let mut rows = Vec::with_capacity(n);
        let mut offset = 0.0;
        let mut prev: Option<f64> = None;
        for xi in spectral::grid(n, 2.0 * PI) {
            let raw = self.phase(xi);
            if let Some(p) = prev {
                let jump = raw - p;
                if jump > PI {
                    offset -= 2.0 * PI;
                } else if jump < -PI {
                    offset += 2.0 * PI;
                }
            }
            prev = Some(raw);
            rows.push(SolutionRow {
                xi,
                density: self.density(xi),
                phase: raw + offset,
                velocity: flow.velocity(xi, t),
                flow: flow.flow_density(xi, t),
            });
        }
        rows
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolutionRow {
    pub xi: f64,
    pub density: f64,
    pub phase: f64,
    pub velocity: f64,
    pub flow: f64,
}

/// Velocity and flow density of a balanced state in the lab, in
/// dimensionless units (multiply by [`RECOIL_VELOCITY_SCALE`] for `hbar k_L/m`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowField {
    pub solution: BalancedSolution,
    pub j0: f64,
    pub alpha: f64,
}

impl FlowField {
    /// `J0 / R^2(xi) - alpha t`. Where the density vanishes the value is a
    /// signed infinity (or `-alpha t` when `J0 = 0`).
    pub fn velocity(&self, xi: f64, t: f64) -> f64 {
        let r_sq = self.solution.exact_density(xi);
        if r_sq <= 0.0 {
            if self.j0 == 0.0 {
                return -self.alpha * t;
            }
            return self.j0.signum() * f64::INFINITY;
        }
        self.j0 / r_sq - self.alpha * t
    }

    /// `J0 - alpha R^2(xi) t`.
    pub fn flow_density(&self, xi: f64, t: f64) -> f64 {
        self.j0 - self.alpha * self.solution.exact_density(xi) * t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference() -> BalancedSolution {
        solve_balance(-1.0, 0.05, 1.0, 0.0, FamilySign::Plus).unwrap()
    }

    #[test]
    fn chemical_potential_examples() {
        assert_eq!(chemical_potential(-1.0, 1.0).unwrap(), 0.0);
        assert_eq!(chemical_potential(-1.0, 1.5).unwrap(), -0.5);
        assert_eq!(chemical_potential(2.0, 0.25).unwrap(), 1.5);
        assert!(matches!(chemical_potential(0.0, 1.0), Err(Error::BalanceInfeasible(_))));
    }

    #[test]
    fn reference_amplitudes() {
        let s = reference();
        assert_eq!(s.mu, 0.0);
        assert_relative_eq!(s.a, 1.05f64.sqrt(), epsilon = 1e-15);
        assert_eq!(s.c, 0.0);
        assert!(s.b.abs() < 1e-16);
        assert_relative_eq!(s.d, 0.95f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(s.exact_density(0.0), 1.05, epsilon = 1e-15);
        assert_relative_eq!(s.density(0.0), 1.05, epsilon = 1e-14);
        assert!(s.residual_stationary(512).unwrap() < 1e-10);
    }

    #[test]
    fn algebraic_relations_hold() {
        for sign in [FamilySign::Plus, FamilySign::Minus] {
            for k in 0..16 {
                let s = solve_balance(-1.0, 0.2, 1.0, k as f64 * PI / 8.0, sign).unwrap();
                let (a, b, c, d) = (s.a, s.b, s.c, s.d);
                assert!((s.g1d * (a * a + c * c) - (s.mu - s.v0 - 1.0)).abs() < 1e-12);
                assert!((a * b + c * d).abs() < 1e-12);
                assert!((s.g1d * (b * b + d * d - a * a - c * c) - 2.0 * s.v0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn infeasible_parameters_name_the_inequality() {
        // g = -1, N' = 1 => mu - 1 = -1; V0 = 1.5 makes (mu + V0 - 1)/g < 0.
        let err = solve_balance(-1.0, 1.5, 1.0, 0.0, FamilySign::Plus).unwrap_err();
        assert!(err.to_string().contains("(mu + V0 - 1)/g1d"), "{err}");
        let err = solve_balance(1.0, 1.5, 1.0, 0.0, FamilySign::Plus).unwrap_err();
        assert!(err.to_string().contains("(mu - V0 - 1)/g1d"), "{err}");
    }

    #[test]
    fn lattice_free_case_is_flat() {
        let s = solve_balance(-1.0, 0.0, 0.7, 0.3, FamilySign::Minus).unwrap();
        for k in 0..50 {
            let xi = k as f64 * 0.13;
            assert_relative_eq!(s.density(xi), 0.7, epsilon = 1e-14);
        }
        assert!(s.residual_stationary(128).unwrap() < 1e-12);
    }

    #[test]
    fn exact_density_examples() {
        let s = reference();
        assert_eq!(s.exact_density(PI / 4.0), 1.0 - 0.05 / -1.0 * (PI / 2.0).cos());
        assert!((s.exact_density(PI / 4.0) - 1.0).abs() < 1e-16);
        for k in 0..20 {
            let xi = -3.0 + 0.37 * k as f64;
            assert!((s.exact_density(xi) - s.exact_density(xi + PI)).abs() < 1e-14);
        }
    }

    #[test]
    fn flow_constant_matches_closed_form() {
        let s = reference();
        let expected = ((s.mu - 1.0).powi(2) - s.v0 * s.v0).sqrt() / s.g1d.abs();
        assert_relative_eq!(s.flow_constant(), expected, epsilon = 1e-14);
        assert_relative_eq!(s.flow_constant(), 0.9975f64.sqrt(), epsilon = 1e-14);
        let m = solve_balance(-1.0, 0.05, 1.0, 0.0, FamilySign::Minus).unwrap();
        assert_relative_eq!(m.flow_constant(), -expected, epsilon = 1e-14);
    }

    #[test]
    fn flow_constant_from_numerical_phase_gradient() {
        // theta' R^2 from central differences of the unwrapped phase.
        let s = solve_balance(-1.0, 0.2, 1.0, 0.9, FamilySign::Plus).unwrap();
        let h = 1e-5;
        for k in 0..12 {
            let xi = 0.1 + 0.5 * k as f64;
            let mut dtheta = s.phase(xi + h) - s.phase(xi - h);
            if dtheta > PI {
                dtheta -= 2.0 * PI;
            } else if dtheta < -PI {
                dtheta += 2.0 * PI;
            }
            let j = dtheta / (2.0 * h) * s.density(xi);
            assert!((j - s.flow_constant()).abs() < 1e-8, "{j} vs {}", s.flow_constant());
        }
    }

    #[test]
    fn touching_zero_density_has_zero_flow() {
        // V0 = |mu - 1| with g = -1, N' = 1.
        let s = solve_balance(-1.0, 1.0, 1.0, 0.4, FamilySign::Plus).unwrap();
        assert!(s.flow_constant().abs() < 1e-15);
        let f = s.flow_field(0.3);
        // (mu + V0 - 1)/g = 0, so the density vanishes at xi = pi/2.
        assert_eq!(s.exact_density(PI / 2.0), 0.0);
        assert_eq!(f.velocity(PI / 2.0, 2.0), -0.6);
        assert!(f.flow_density(PI / 2.0, 2.0).is_finite());
        let s = solve_balance(-1.0, 1.0 - 1e-9, 1.0, 0.4, FamilySign::Plus).unwrap();
        assert!(s.residual_stationary(128).unwrap() < 1e-10);
    }

    #[test]
    fn velocity_sentinel_at_zero_density() {
        let mut f = reference().flow_field(0.1);
        // Force a zero of R^2 with non-zero J0.
        f.solution.n_prime = 0.05;
        assert_eq!(f.velocity(PI / 2.0, 1.0), f64::INFINITY);
    }

    #[test]
    fn flow_examples() {
        let f = reference().flow_field(0.0);
        for xi in [0.0, 0.7, 2.0] {
            assert_eq!(f.flow_density(xi, 0.0), f.flow_density(xi, 17.0));
        }
        let f = reference().flow_field(0.25);
        for xi in [0.0, 0.7, 2.0] {
            assert_eq!(f.flow_density(xi, 0.0), f.j0);
            let h = 1e-3;
            let slope = (f.flow_density(xi, 3.0 + h) - f.flow_density(xi, 3.0 - h)) / (2.0 * h);
            assert_relative_eq!(slope, -0.25 * f.solution.exact_density(xi), epsilon = 1e-9);
        }
    }

    #[test]
    fn perturbed_amplitude_is_detected() {
        let mut s = reference();
        s.a += 1e-3;
        assert!(s.residual_stationary(512).unwrap() > 1e-5);
    }

    #[test]
    fn residual_grid_too_small() {
        assert!(reference().residual_stationary(32).is_err());
    }

    #[test]
    fn table_phase_is_continuous() {
        let rows = solve_balance(-1.0, 0.2, 1.0, 0.0, FamilySign::Plus)
            .unwrap()
            .table(0.1, 1.0, 256);
        for w in rows.windows(2) {
            assert!((w[1].phase - w[0].phase).abs() < 0.2);
        }
        // One full turn over [0, 2 pi) for the Plus branch.
        assert!(rows.last().unwrap().phase > 5.5);
    }

    proptest! {
        #[test]
        fn family_shares_one_density(
            v0 in 0.0..0.9f64, n_prime in 1.0..2.0f64, angle in 0.0..6.28f64, xi in -5.0..5.0f64,
        ) {
            let s = solve_balance(-1.0, v0, n_prime, angle, FamilySign::Plus).unwrap();
            let m = solve_balance(-1.0, v0, n_prime, 0.0, FamilySign::Minus).unwrap();
            prop_assert!((s.density(xi) - m.density(xi)).abs() < 1e-12);
            prop_assert!((s.density(xi) - s.exact_density(xi)).abs() < 1e-12);
            // balance identity
            prop_assert!((s.g1d * s.density(xi) + v0 * (2.0 * xi).cos() - (s.mu - 1.0)).abs() < 1e-12);
            prop_assert!((s.current(xi) - s.flow_constant()).abs() < 1e-12);
        }
    }
}
