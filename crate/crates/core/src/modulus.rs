//! The decoupled modulus equation
//!
//! ```text
//! R'' = J0^2 / R^3 + g R^3 + (V0 cos 2xi - mu) R
//! ```
//!
//! treated as a driven oscillator in `xi`, with stroboscopic sampling at the
//! drive period `pi`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::model::LatticeParams;
use crate::ode::{Dop853, OdeSystem, Stats, StepError, Tolerances};
use crate::{Error, Result};

/// Drive period of `cos 2xi`.
pub const PERIOD: f64 = PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitParams {
    pub g1d: f64,
    pub mu: f64,
    pub j0: f64,
    pub v0: f64,
}

impl OrbitParams {
    pub fn new(g1d: f64, mu: f64, j0: f64, v0: f64) -> Result<Self> {
        let p = Self { g1d, mu, j0, v0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("g1d", self.g1d), ("mu", self.mu), ("J0", self.j0), ("V0", self.v0)] {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Orbit parameters of a lattice configuration; needs a chemical potential.
    pub fn from_lattice(p: &LatticeParams) -> Result<Self> {
        Self::new(p.g1d, p.mu()?, p.j0, p.signed_v0())
    }

    pub fn period(&self) -> f64 {
        PERIOD
    }

    /// `R''` at `(xi, r)`, without the zero check.
    #[inline]
    pub fn acceleration(&self, xi: f64, r: f64) -> f64 {
        let r2 = r * r;
        let centrifugal = if self.j0 == 0.0 { 0.0 } else { self.j0 * self.j0 / (r2 * r) };
        centrifugal + self.g1d * r2 * r + (self.v0 * (2.0 * xi).cos() - self.mu) * r
    }

    /// Coefficient of the linearized equation `dR'' = k(xi) dR`.
    #[inline]
    pub fn tangent_coefficient(&self, xi: f64, r: f64) -> f64 {
        let r2 = r * r;
        let centrifugal = if self.j0 == 0.0 { 0.0 } else { -3.0 * self.j0 * self.j0 / (r2 * r2) };
        centrifugal + 3.0 * self.g1d * r2 + self.v0 * (2.0 * xi).cos() - self.mu
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulusState {
    pub r: f64,
    pub r_xi: f64,
    pub xi: f64,
}

impl ModulusState {
    pub fn new(r: f64, r_xi: f64, xi: f64) -> Self {
        Self { r, r_xi, xi }
    }

    pub fn mirrored(&self) -> Self {
        Self::new(-self.r, -self.r_xi, self.xi)
    }
}

/// Right-hand side `(R', R'')`.
pub fn rhs(state: &ModulusState, params: &OrbitParams) -> Result<(f64, f64)> {
    if state.r == 0.0 && params.j0 != 0.0 {
        return Err(Error::Singularity {
            r: state.r,
            j0: params.j0,
            xi: state.xi,
        });
    }
    Ok((state.r_xi, params.acceleration(state.xi, state.r)))
}

/// First-order form of the modulus equation, `y = (R, R')`.
#[derive(Debug, Clone, Copy)]
pub struct ModulusFlow(pub OrbitParams);

impl OdeSystem<2> for ModulusFlow {
    #[inline]
    fn rhs(&self, xi: f64, y: &[f64; 2], dydt: &mut [f64; 2]) {
        dydt[0] = y[1];
        dydt[1] = self.0.acceleration(xi, y[0]);
    }
}

/// Modulus equation together with its linearization, `y = (R, R', dR, dR')`.
#[derive(Debug, Clone, Copy)]
pub struct TangentFlow(pub OrbitParams);

impl OdeSystem<4> for TangentFlow {
    #[inline]
    fn rhs(&self, xi: f64, y: &[f64; 4], dydt: &mut [f64; 4]) {
        dydt[0] = y[1];
        dydt[1] = self.0.acceleration(xi, y[0]);
        dydt[2] = y[3];
        dydt[3] = self.0.tangent_coefficient(xi, y[0]) * y[2];
    }

    // The reference orbit alone sets the steps, so it matches a plain `ModulusFlow` run.
    fn error_components(&self) -> usize {
        2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationOptions {
    pub tol: Tolerances,
    /// `|R|` above which the orbit counts as unbounded.
    pub r_escape: f64,
    /// Singularity threshold relative to `max(|R0|, 1)`; only used when `J0 != 0`.
    pub singular_fraction: f64,
    /// Drive phase of the first section.
    pub xi0: f64,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            r_escape: 1e3,
            singular_fraction: 1e-8,
            xi0: 0.0,
        }
    }
}

impl IntegrationOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol.rel > 0.0 && self.tol.abs > 0.0) {
            return Err(Error::InvalidInput(format!(
                "tolerances must be positive, got rel = {}, abs = {}",
                self.tol.rel, self.tol.abs
            )));
        }
        if !(self.r_escape > 0.0) || !(self.singular_fraction >= 0.0) || !self.xi0.is_finite() {
            return Err(Error::InvalidInput("escape radius, singularity threshold and xi0 must be valid".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerminationKind {
    Escape,
    Singularity,
}

/// Where and why an orbit stopped early.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Termination {
    pub kind: TerminationKind,
    pub xi: f64,
    pub r: f64,
    pub r_xi: f64,
    /// Whole drive periods completed before the event.
    pub completed_periods: usize,
}

/// Steps an [`OdeSystem`] whose first component is `R`, period by period,
/// watching for escape and the `R = 0` singularity after every accepted step.
pub(crate) struct PeriodDriver<'a, S, const N: usize> {
    system: &'a S,
    solver: Dop853<N>,
    opts: IntegrationOptions,
    singular_r: f64,
    watch_singularity: bool,
    min_abs_r: f64,
    completed: usize,
}

impl<'a, S: OdeSystem<N>, const N: usize> PeriodDriver<'a, S, N> {
    pub(crate) fn new(
        system: &'a S,
        params: &OrbitParams,
        y0: [f64; N],
        opts: IntegrationOptions,
        dense: bool,
    ) -> Result<Self> {
        params.validate()?;
        opts.validate()?;
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("initial state must be finite".into()));
        }
        if y0[0] == 0.0 && params.j0 != 0.0 {
            return Err(Error::Singularity {
                r: 0.0,
                j0: params.j0,
                xi: opts.xi0,
            });
        }
        let solver = Dop853::new(system, opts.xi0, y0, opts.tol).with_dense_output(dense);
        Ok(Self {
            system,
            solver,
            opts,
            singular_r: opts.singular_fraction * y0[0].abs().max(1.0),
            watch_singularity: params.j0 != 0.0,
            min_abs_r: y0[0].abs(),
            completed: 0,
        })
    }

    pub(crate) fn xi(&self) -> f64 {
        self.solver.t()
    }

    pub(crate) fn y(&self) -> &[f64; N] {
        self.solver.y()
    }

    pub(crate) fn min_abs_r(&self) -> f64 {
        self.min_abs_r
    }

    pub(crate) fn stats(&self) -> Stats {
        self.solver.stats()
    }

    pub(crate) fn solver(&self) -> &Dop853<N> {
        &self.solver
    }

    /// Replace the state at the current `xi` (used for renormalization).
    pub(crate) fn reset(&mut self, y: [f64; N]) {
        self.solver.reset_state(self.system, y);
    }

    fn terminate(&self, kind: TerminationKind) -> Termination {
        let y = self.solver.y();
        Termination {
            kind,
            xi: self.solver.t(),
            r: y[0],
            r_xi: y[1],
            completed_periods: self.completed,
        }
    }

    fn classify_failure(&self, err: StepError) -> Termination {
        // A blow-up toward infinity also ends in non-finite trials; tell it
        // apart from a collapse onto R = 0 by where the orbit was heading.
        let r = self.solver.y()[0].abs();
        let kind = match err {
            StepError::MaxSteps { .. } if r >= 1.0 => TerminationKind::Escape,
            _ if r >= self.opts.r_escape.sqrt() => TerminationKind::Escape,
            _ => TerminationKind::Singularity,
        };
        self.terminate(kind)
    }

    /// Take one accepted step toward `target`. `Err` carries a termination.
    pub(crate) fn step(&mut self, target: f64) -> std::result::Result<(), Termination> {
        if let Err(e) = self.solver.step(self.system, target) {
            return Err(self.classify_failure(e));
        }
        let r = self.solver.y()[0].abs();
        self.min_abs_r = self.min_abs_r.min(r);
        if r > self.opts.r_escape {
            return Err(self.terminate(TerminationKind::Escape));
        }
        if self.watch_singularity && r < self.singular_r {
            return Err(self.terminate(TerminationKind::Singularity));
        }
        Ok(())
    }

    /// Integrate to `target` exactly.
    pub(crate) fn advance_to(&mut self, target: f64) -> std::result::Result<(), Termination> {
        while self.solver.t() != target {
            self.step(target)?;
        }
        Ok(())
    }

    /// Integrate through drive period `k` (ending at `xi0 + k pi`).
    pub(crate) fn advance_period(&mut self, k: usize) -> std::result::Result<(), Termination> {
        self.advance_to(self.opts.xi0 + k as f64 * PERIOD)?;
        self.completed = k;
        Ok(())
    }

    /// Integrate to `xi0 + k * interval`; `interval` may be negative.
    pub(crate) fn advance_interval(&mut self, k: usize, interval: f64) -> std::result::Result<(), Termination> {
        let span = k as f64 * interval;
        self.advance_to(self.opts.xi0 + span)?;
        self.completed = (span.abs() / PERIOD + 1e-9).floor() as usize;
        Ok(())
    }
}

/// Output of [`integrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// States at `xi0 + j pi / samples_per_period`, starting with the initial state.
    pub samples: Vec<ModulusState>,
    pub termination: Option<Termination>,
    pub min_abs_r: f64,
    pub stats: Stats,
}

impl Trajectory {
    pub fn last(&self) -> &ModulusState {
        self.samples.last().expect("trajectory always holds the initial state")
    }
}

/// Integrate `n_periods` drive periods from `initial` (its `xi` is the start),
/// sampling `samples_per_period` evenly spaced points per period. The period
/// boundaries are stepped onto exactly; interior samples use dense output.
pub fn integrate(
    params: &OrbitParams,
    initial: &ModulusState,
    n_periods: usize,
    samples_per_period: usize,
    opts: &IntegrationOptions,
) -> Result<Trajectory> {
    if n_periods == 0 {
        return Err(Error::InvalidInput("n_periods must be at least 1".into()));
    }
    if samples_per_period == 0 {
        return Err(Error::InvalidInput("samples_per_period must be at least 1".into()));
    }
    let opts = IntegrationOptions { xi0: initial.xi, ..*opts };
    let flow = ModulusFlow(*params);
    let mut driver = PeriodDriver::new(&flow, params, [initial.r, initial.r_xi], opts, samples_per_period > 1)?;
    let mut samples = Vec::with_capacity(n_periods * samples_per_period + 1);
    samples.push(*initial);
    let dxi = PERIOD / samples_per_period as f64;
    let mut termination = None;
    'periods: for k in 1..=n_periods {
        for j in 1..=samples_per_period {
            let target = if j == samples_per_period {
                opts.xi0 + k as f64 * PERIOD
            } else {
                opts.xi0 + (k - 1) as f64 * PERIOD + j as f64 * dxi
            };
            if j == samples_per_period {
                if let Err(t) = driver.advance_period(k) {
                    termination = Some(t);
                    break 'periods;
                }
                let y = driver.y();
                samples.push(ModulusState::new(y[0], y[1], target));
                continue;
            }
            // Step until the interior sample lies inside the last step.
            while driver.xi() < target {
                if let Err(t) = driver.step(opts.xi0 + k as f64 * PERIOD) {
                    termination = Some(t);
                    break 'periods;
                }
            }
            let y = driver.solver().dense_output(target).expect("dense output enabled");
            samples.push(ModulusState::new(y[0], y[1], target));
        }
    }
    Ok(Trajectory {
        samples,
        termination,
        min_abs_r: driver.min_abs_r(),
        stats: driver.stats(),
    })
}

/// Integrate from `initial` to an arbitrary `xi_end` (forward or backward).
pub fn integrate_to(
    params: &OrbitParams,
    initial: &ModulusState,
    xi_end: f64,
    opts: &IntegrationOptions,
) -> Result<(ModulusState, Option<Termination>)> {
    let opts = IntegrationOptions { xi0: initial.xi, ..*opts };
    let flow = ModulusFlow(*params);
    let mut driver = PeriodDriver::new(&flow, params, [initial.r, initial.r_xi], opts, false)?;
    let term = driver.advance_to(xi_end).err();
    let y = driver.y();
    Ok((ModulusState::new(y[0], y[1], driver.xi()), term))
}

/// One application of the period map `(R, R') at xi -> (R, R') at xi + pi`.
pub fn stroboscopic_map(
    params: &OrbitParams,
    state: &ModulusState,
    opts: &IntegrationOptions,
) -> Result<(ModulusState, Option<Termination>)> {
    integrate_to(params, state, state.xi + PERIOD, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionPoint {
    /// Number of periods elapsed since the initial condition.
    pub k: usize,
    pub r: f64,
    pub r_xi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareSection {
    pub samples: Vec<SectionPoint>,
    pub dropped_transient: usize,
    pub requested_periods: usize,
    pub params: OrbitParams,
    pub initial: ModulusState,
    pub termination: Option<Termination>,
}

impl PoincareSection {
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.samples.iter().map(|p| (p.r, p.r_xi))
    }

    pub fn is_complete(&self) -> bool {
        self.termination.is_none()
    }
}

/// Collects section points `k = drop+1 ..= n_periods` while a driver runs.
pub(crate) struct SectionBuilder {
    samples: Vec<SectionPoint>,
    drop: usize,
}

impl SectionBuilder {
    pub(crate) fn new(n_periods: usize, drop: usize) -> Self {
        Self {
            samples: Vec::with_capacity(n_periods.saturating_sub(drop)),
            drop,
        }
    }

    pub(crate) fn record(&mut self, k: usize, r: f64, r_xi: f64) {
        if k > self.drop {
            self.samples.push(SectionPoint { k, r, r_xi });
        }
    }

    pub(crate) fn finish(
        self,
        params: &OrbitParams,
        initial: &ModulusState,
        n_periods: usize,
        termination: Option<Termination>,
    ) -> PoincareSection {
        PoincareSection {
            samples: self.samples,
            dropped_transient: self.drop,
            requested_periods: n_periods,
            params: *params,
            initial: *initial,
            termination,
        }
    }
}

pub(crate) fn check_section_request(n_periods: usize, drop: usize) -> Result<()> {
    if n_periods == 0 {
        return Err(Error::InvalidInput("n_periods must be at least 1".into()));
    }
    if drop >= n_periods {
        return Err(Error::InvalidInput(format!(
            "drop ({drop}) must be smaller than n_periods ({n_periods})"
        )));
    }
    Ok(())
}

/// Stroboscopic section at `xi = xi0 + k pi` with the first `drop` periods discarded.
pub fn poincare_section(
    params: &OrbitParams,
    initial: &ModulusState,
    n_periods: usize,
    drop: usize,
    opts: &IntegrationOptions,
) -> Result<PoincareSection> {
    check_section_request(n_periods, drop)?;
    let opts = IntegrationOptions { xi0: initial.xi, ..*opts };
    let flow = ModulusFlow(*params);
    let mut driver = PeriodDriver::new(&flow, params, [initial.r, initial.r_xi], opts, false)?;
    let mut builder = SectionBuilder::new(n_periods, drop);
    let mut termination = None;
    for k in 1..=n_periods {
        if let Err(t) = driver.advance_period(k) {
            termination = Some(t);
            break;
        }
        let y = driver.y();
        builder.record(k, y[0], y[1]);
    }
    Ok(builder.finish(params, initial, n_periods, termination))
}

/// `R(xi)` at arbitrary points, integrating forward and backward from `initial`.
/// Entries past a termination are `NaN`.
pub fn sample_profile(
    params: &OrbitParams,
    initial: &ModulusState,
    points: &[f64],
    opts: &IntegrationOptions,
) -> Result<Vec<f64>> {
    if points.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("sample points must be finite".into()));
    }
    let mut out = vec![f64::NAN; points.len()];
    let mut forward: Vec<usize> = (0..points.len()).filter(|&i| points[i] >= initial.xi).collect();
    let mut backward: Vec<usize> = (0..points.len()).filter(|&i| points[i] < initial.xi).collect();
    forward.sort_by(|&a, &b| points[a].total_cmp(&points[b]));
    backward.sort_by(|&a, &b| points[b].total_cmp(&points[a]));
    let opts = IntegrationOptions { xi0: initial.xi, ..*opts };
    let flow = ModulusFlow(*params);
    for (order, sign) in [(forward, 1.0), (backward, -1.0)] {
        let Some(&far) = order.last() else { continue };
        let end = points[far];
        let mut driver = PeriodDriver::new(&flow, params, [initial.r, initial.r_xi], opts, true)?;
        for &i in &order {
            let target = points[i];
            if target == initial.xi {
                out[i] = initial.r;
                continue;
            }
            let mut failed = false;
            while sign * (target - driver.xi()) > 0.0 {
                if driver.step(end).is_err() {
                    failed = true;
                    break;
                }
            }
            if failed {
                break;
            }
            out[i] = driver.solver().dense_output(target).expect("dense output enabled")[0];
        }
    }
    Ok(out)
}
