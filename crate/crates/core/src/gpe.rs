//! Split-step Fourier evolution of the frame equation
//!
//! ```text
//! i u_t = -u_xixi + [V0 cos 2xi + g1d |u|^2] u
//! ```
//!
//! on a periodic box of `m` lattice periods, plus assembly of lab-frame
//! density and flow grids.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::exact::BalancedSolution;
use crate::model::{Filling, LatticeParams};
use crate::modulus::{sample_profile, IntegrationOptions, ModulusState, OrbitParams};
use crate::spectral::{self, Transform};
use crate::{Error, Result};

/// Default number of lattice periods in the box.
pub const DEFAULT_LATTICE_PERIODS: usize = 8;
/// Default number of grid points.
pub const DEFAULT_POINTS: usize = 1024;

/// Field on the uniform grid `xi_j = j L / n`, `L = m pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub values: Vec<Complex64>,
    pub lattice_periods: usize,
    pub t: f64,
    pub params: LatticeParams,
}

impl FieldGrid {
    pub fn new(params: LatticeParams, lattice_periods: usize, values: Vec<Complex64>) -> Result<Self> {
        let n = values.len();
        if n < 64 || !n.is_power_of_two() {
            return Err(Error::InvalidInput(format!("grid size must be a power of two >= 64, got {n}")));
        }
        if lattice_periods == 0 {
            return Err(Error::InvalidInput("box must hold at least one lattice period".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("initial field must be finite".into()));
        }
        Ok(Self {
            values,
            lattice_periods,
            t: 0.0,
            params,
        })
    }

    pub fn from_fn(
        params: LatticeParams,
        lattice_periods: usize,
        n_points: usize,
        f: impl Fn(f64) -> Complex64,
    ) -> Result<Self> {
        let length = lattice_periods as f64 * PI;
        let values = spectral::grid(n_points, length).into_iter().map(f).collect();
        Self::new(params, lattice_periods, values)
    }

    /// Exact balanced state sampled on the grid. Its `cos xi`/`sin xi` modes
    /// have period `2 pi`, so the box needs an even number of lattice periods.
    pub fn from_exact(solution: &BalancedSolution, alpha: f64, lattice_periods: usize, n_points: usize) -> Result<Self> {
        if lattice_periods % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "exact states need an even number of lattice periods, got {lattice_periods}"
            )));
        }
        let params = LatticeParams::new(
            solution.v0,
            solution.g1d,
            alpha,
            solution.flow_constant(),
            Some(Filling::AtomsPerWell(solution.n_prime)),
        )?;
        Self::from_fn(params, lattice_periods, n_points, |xi| solution.phi(xi))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.lattice_periods as f64 * PI
    }

    pub fn dxi(&self) -> f64 {
        self.length() / self.len() as f64
    }

    pub fn xi(&self) -> Vec<f64> {
        spectral::grid(self.len(), self.length())
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// Discrete norm `sum |u|^2 dxi` over the whole box.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.dxi()
    }

    /// Atoms per lattice well, `norm / m`.
    pub fn atoms_per_well(&self) -> f64 {
        self.norm() / self.lattice_periods as f64
    }

    /// Box-averaged density, `(1/pi)` times the atoms per well.
    pub fn mean_density(&self) -> f64 {
        self.norm() / self.length()
    }

    /// Local current `Im(conj(u) u_xi)`.
    pub fn current(&self) -> Vec<f64> {
        let du = spectral::derivative(&self.values, self.length(), 1);
        self.values.iter().zip(&du).map(|(u, d)| (u.conj() * d).im).collect()
    }

    /// Box average of the current.
    pub fn mean_current(&self) -> f64 {
        let c = self.current();
        c.iter().sum::<f64>() / c.len() as f64
    }
}

/// Rule-of-thumb step `0.1 dxi^2`.
pub fn default_dt(lattice_periods: usize, n_points: usize) -> f64 {
    let dxi = lattice_periods as f64 * PI / n_points as f64;
    0.1 * dxi * dxi
}

/// Strang splitting: half potential+nonlinear, full kinetic, half potential+nonlinear.
pub struct SplitStepSolver {
    transform: Transform,
    kinetic: Vec<Complex64>,
    potential: Vec<f64>,
    g1d: f64,
    dt: f64,
}

impl SplitStepSolver {
    pub fn new(grid: &FieldGrid, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
        }
        let n = grid.len();
        let kinetic = spectral::wavenumbers(n, grid.length())
            .into_iter()
            .map(|k| Complex64::from_polar(1.0, -k * k * dt))
            .collect();
        let potential = grid.xi().into_iter().map(|x| grid.params.lattice_potential(x)).collect();
        Ok(Self {
            transform: Transform::new(n),
            kinetic,
            potential,
            g1d: grid.params.g1d,
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn half_potential(&self, u: &mut [Complex64]) {
        let h = 0.5 * self.dt;
        for (v, p) in u.iter_mut().zip(&self.potential) {
            *v *= Complex64::from_polar(1.0, -(p + self.g1d * v.norm_sqr()) * h);
        }
    }

    pub fn step(&mut self, u: &mut [Complex64]) {
        self.half_potential(u);
        self.transform.forward(u);
        for (v, k) in u.iter_mut().zip(&self.kinetic) {
            *v *= k;
        }
        self.transform.inverse(u);
        self.half_potential(u);
    }
}

const BLOWUP_DENSITY: f64 = 1e150;

fn blown_up(u: &[Complex64]) -> bool {
    u.iter().any(|v| !(v.norm_sqr() <= BLOWUP_DENSITY))
}

/// Evolve `n_steps` of size `dt`.
pub fn evolve(grid: &FieldGrid, dt: f64, n_steps: usize) -> Result<FieldGrid> {
    let mut history = evolve_recording(grid, dt, n_steps, n_steps.max(1))?;
    Ok(history.pop().expect("history holds the final state"))
}

/// Evolve and keep a snapshot every `record_every` steps (the initial state
/// included, and the final state always).
pub fn evolve_recording(grid: &FieldGrid, dt: f64, n_steps: usize, record_every: usize) -> Result<Vec<FieldGrid>> {
    if record_every == 0 {
        return Err(Error::InvalidInput("record_every must be positive".into()));
    }
    let mut solver = SplitStepSolver::new(grid, dt)?;
    let mut state = grid.clone();
    let t0 = grid.t;
    let mut history = vec![state.clone()];
    for step in 1..=n_steps {
        solver.step(&mut state.values);
        state.t = t0 + step as f64 * dt;
        if blown_up(&state.values) {
            return Err(Error::BlowUp { step, t: state.t });
        }
        if step % record_every == 0 || step == n_steps {
            history.push(state.clone());
        }
    }
    Ok(history)
}

/// Row-major real grid, rows indexed by time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Grid2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Lab-frame density and flow on an `(t, x)` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabFrameDensity {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub density: Grid2,
    pub flow: Grid2,
}

fn check_span(x: &[f64], length: f64) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("lab coordinates must be finite".into()));
    }
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo > length {
        return Err(Error::Domain(format!(
            "requested x span {} exceeds the periodic box length {length}",
            hi - lo
        )));
    }
    Ok(())
}

/// Lab-frame fields from frame snapshots: the density is `|u(x + alpha t^2, t)|^2`
/// (the gauge phase drops out) and the flow `Im(conj(u) u_xi) - alpha t |u|^2`.
pub fn to_lab_frame(history: &[FieldGrid], alpha: f64, x: &[f64]) -> Result<LabFrameDensity> {
    let Some(first) = history.first() else {
        return Err(Error::InvalidInput("empty history".into()));
    };
    let length = first.length();
    check_span(x, length)?;
    let mut density = Grid2::zeros(history.len(), x.len());
    let mut flow = Grid2::zeros(history.len(), x.len());
    for (i, snap) in history.iter().enumerate() {
        let t = snap.t;
        let xi: Vec<f64> = x.iter().map(|&x| x + alpha * t * t).collect();
        let u = spectral::interpolate(&snap.values, length, &xi);
        let du = spectral::interpolate(&spectral::derivative(&snap.values, length, 1), length, &xi);
        for (j, (u, d)) in u.iter().zip(&du).enumerate() {
            let rho = u.norm_sqr();
            density.set(i, j, rho);
            flow.set(i, j, (u.conj() * d).im - alpha * t * rho);
        }
    }
    Ok(LabFrameDensity {
        t: history.iter().map(|h| h.t).collect(),
        x: x.to_vec(),
        density,
        flow,
    })
}

/// `J(xi, t) = J0 - alpha R(xi)^2 t`, rows indexed by `t_grid`.
pub fn flow_density_grid(modulus_profile: &[f64], j0: f64, alpha: f64, t_grid: &[f64]) -> Grid2 {
    let mut out = Grid2::zeros(t_grid.len(), modulus_profile.len());
    for (i, &t) in t_grid.iter().enumerate() {
        for (j, &r) in modulus_profile.iter().enumerate() {
            out.set(i, j, j0 - alpha * r * r * t);
        }
    }
    out
}

/// Lab-frame density `R(x + alpha t^2)^2` and flow from a solution of the
/// modulus equation started at `initial`.
pub fn lab_density_from_modulus(
    params: &OrbitParams,
    initial: &ModulusState,
    alpha: f64,
    x: &[f64],
    t: &[f64],
    opts: &IntegrationOptions,
) -> Result<LabFrameDensity> {
    let xi: Vec<f64> = t.iter().flat_map(|&t| x.iter().map(move |&x| x + alpha * t * t)).collect();
    let r = sample_profile(params, initial, &xi, opts)?;
    let mut density = Grid2::zeros(t.len(), x.len());
    let mut flow = Grid2::zeros(t.len(), x.len());
    for (i, &ti) in t.iter().enumerate() {
        for j in 0..x.len() {
            let r = r[i * x.len() + j];
            density.set(i, j, r * r);
            flow.set(i, j, params.j0 - alpha * r * r * ti);
        }
    }
    Ok(LabFrameDensity {
        t: t.to_vec(),
        x: x.to_vec(),
        density,
        flow,
    })
}
