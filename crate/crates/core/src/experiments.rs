//! Seeded orbit ensembles: the ten built-in cases and parameter sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos::{analyze_orbit, Label, LyapunovOutcome, OrbitAnalysis, Thresholds};
use crate::modulus::{IntegrationOptions, ModulusState, OrbitParams, PoincareSection, Termination};
use crate::{Error, Result};

/// Name of the generator written into every report.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng";

/// SplitMix64 mix of `(master, index)`; child seeds of distinct indices are
/// decorrelated even for adjacent masters.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    AllRegular,
    AllChaotic,
    /// Both regular and chaotic orbits present.
    Mixed,
    NoChaotic,
}

impl Expectation {
    pub fn is_met(self, counts: &Counts) -> bool {
        match self {
            Expectation::AllRegular => counts.regular == counts.total,
            Expectation::AllChaotic => counts.chaotic == counts.total,
            Expectation::Mixed => counts.regular > 0 && counts.chaotic > 0,
            Expectation::NoChaotic => counts.chaotic == 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub id: u32,
    /// Parameter sets; each gets `n_orbits` random initial conditions.
    pub sets: Vec<OrbitParams>,
    pub n_orbits: usize,
    /// Initial conditions are drawn from `[-ic_half_width, ic_half_width]^2`.
    pub ic_half_width: f64,
    pub expected: Option<Expectation>,
    pub description: String,
}

fn params(g1d: f64, mu: f64, j0: f64, v0: f64) -> OrbitParams {
    OrbitParams { g1d, mu, j0, v0 }
}

/// The repulsive-interaction family standing in for case 10:
/// `g1d x V0 x mu x J0 = {0.5, 1, 2} x {0.5, 2, 5} x {-0.5, 0.5} x {0.01, 0.16}`.
pub fn repulsive_grid() -> Vec<OrbitParams> {
    let mut out = Vec::with_capacity(36);
    for g in [0.5, 1.0, 2.0] {
        for v0 in [0.5, 2.0, 5.0] {
            for mu in [-0.5, 0.5] {
                for j0 in [0.01, 0.16] {
                    out.push(params(g, mu, j0, v0));
                }
            }
        }
    }
    out
}

/// Built-in case `id` in `1..=10`.
pub fn builtin_case(id: u32) -> Result<CaseSpec> {
    use Expectation::*;
    let (sets, expected, description) = match id {
        1 => (vec![params(-1.0, -0.5, 0.01, 0.05)], AllRegular, "weak lattice"),
        2 => (vec![params(-1.0, -0.5, 0.01, 0.2)], Mixed, "lattice strengthened"),
        3 => (vec![params(-1.0, -0.5, 0.01, 0.5)], AllChaotic, "lattice strengthened further"),
        4 => (vec![params(-1.0, -0.5, 0.16, 0.5)], AllRegular, "larger flow density"),
        5 => (vec![params(-1.0, -0.5, 0.16, 3.0)], Mixed, "larger flow, deep lattice"),
        6 => (vec![params(-1.0, -0.5, 0.16, 5.0)], AllChaotic, "larger flow, deeper lattice"),
        7 => (vec![params(-1.0, 0.5, 0.16, 0.5)], AllRegular, "positive chemical potential"),
        8 => (vec![params(-1.0, 0.5, 0.16, 2.0)], Mixed, "positive chemical potential, deep lattice"),
        9 => (vec![params(-1.0, 0.5, 0.16, 4.0)], AllChaotic, "positive chemical potential, deeper lattice"),
        10 => (repulsive_grid(), NoChaotic, "repulsive interaction grid"),
        _ => return Err(Error::InvalidInput(format!("case id must be in 1..=10, got {id}"))),
    };
    Ok(CaseSpec {
        id,
        sets,
        n_orbits: 10,
        ic_half_width: 0.5,
        expected: Some(expected),
        description: description.to_string(),
    })
}

pub fn builtin_cases() -> Vec<CaseSpec> {
    (1..=10).map(|id| builtin_case(id).expect("ids 1..=10 exist")).collect()
}

/// Numerical settings shared by every orbit of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub n_periods: usize,
    pub drop: usize,
    pub integration: IntegrationOptions,
    pub thresholds: Thresholds,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            n_periods: 5100,
            drop: 100,
            integration: IntegrationOptions::default(),
            thresholds: Thresholds::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub total: usize,
    pub regular: usize,
    pub chaotic: usize,
    pub unbounded: usize,
    pub indeterminate: usize,
}

impl Counts {
    pub fn add(&mut self, label: Label) {
        self.total += 1;
        match label {
            Label::Regular => self.regular += 1,
            Label::Chaotic => self.chaotic += 1,
            Label::Unbounded => self.unbounded += 1,
            Label::Indeterminate => self.indeterminate += 1,
        }
    }

    pub fn chaotic_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.chaotic as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub orbit_id: usize,
    pub set_index: usize,
    pub params: OrbitParams,
    pub initial: [f64; 2],
    /// Seed of the generator that drew this orbit's set.
    pub seed: u64,
    pub lambda: Option<f64>,
    pub occupancy: Option<f64>,
    pub label: Label,
    pub samples: usize,
    pub termination: Option<Termination>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub case_id: u32,
    pub description: String,
    pub seed: u64,
    pub rng: String,
    pub settings: RunSettings,
    pub orbits: Vec<OrbitRecord>,
    pub counts: Counts,
    pub chaotic_fraction: f64,
    pub expected: Option<Expectation>,
    pub expectation_met: Option<bool>,
}

/// A case run with the full sections kept for plotting.
#[derive(Debug, Clone)]
pub struct CaseRun {
    pub report: CaseReport,
    pub sections: Vec<PoincareSection>,
    pub lyapunov: Vec<LyapunovOutcome>,
}

/// Seed of built-in case `case_id` under a master seed; each case draws its own initial conditions.
pub fn case_seed(master: u64, case_id: u32) -> u64 {
    derive_seed(master, u64::from(case_id))
}

/// Initial conditions for set `set_index`: `n` uniform draws from the box,
/// `R` first then `R'`, from `ChaCha8Rng` seeded with `derive_seed(seed, set_index)`.
pub fn draw_initial_conditions(seed: u64, set_index: usize, n: usize, half_width: f64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, set_index as u64));
    (0..n)
        .map(|_| {
            let r = rng.gen_range(-half_width..=half_width);
            let v = rng.gen_range(-half_width..=half_width);
            [r, v]
        })
        .collect()
}

fn validate_case(spec: &CaseSpec) -> Result<()> {
    if spec.sets.is_empty() || spec.n_orbits == 0 {
        return Err(Error::InvalidInput("case needs at least one parameter set and one orbit".into()));
    }
    if !(spec.ic_half_width > 0.0 && spec.ic_half_width.is_finite()) {
        return Err(Error::InvalidInput("initial-condition box must have positive width".into()));
    }
    for p in &spec.sets {
        p.validate()?;
    }
    Ok(())
}

/// Run every orbit of `spec`. Orbits run in parallel; results are ordered by
/// orbit id, so the report does not depend on scheduling.
pub fn run_case(spec: &CaseSpec, seed: u64, settings: &RunSettings) -> Result<CaseRun> {
    validate_case(spec)?;
    let jobs: Vec<(usize, usize, OrbitParams, [f64; 2])> = spec
        .sets
        .iter()
        .enumerate()
        .flat_map(|(si, p)| {
            draw_initial_conditions(seed, si, spec.n_orbits, spec.ic_half_width)
                .into_iter()
                .enumerate()
                .map(move |(j, ic)| (si * spec.n_orbits + j, si, *p, ic))
        })
        .collect();
    let results: Vec<Result<OrbitAnalysis>> = jobs
        .par_iter()
        .map(|(_, _, p, ic)| {
            analyze_orbit(
                p,
                &ModulusState::new(ic[0], ic[1], settings.integration.xi0),
                settings.n_periods,
                settings.drop,
                &settings.integration,
                &settings.thresholds,
            )
        })
        .collect();
    let mut orbits = Vec::with_capacity(jobs.len());
    let mut sections = Vec::with_capacity(jobs.len());
    let mut lyapunov = Vec::with_capacity(jobs.len());
    let mut counts = Counts::default();
    for ((id, si, p, ic), res) in jobs.into_iter().zip(results) {
        let a = res?;
        counts.add(a.class.label);
        orbits.push(OrbitRecord {
            orbit_id: id,
            set_index: si,
            params: p,
            initial: ic,
            seed: derive_seed(seed, si as u64),
            lambda: a.class.lambda,
            occupancy: a.class.occupancy,
            label: a.class.label,
            samples: a.section.samples.len(),
            termination: a.section.termination,
        });
        sections.push(a.section);
        lyapunov.push(a.lyapunov);
    }
    let report = CaseReport {
        case_id: spec.id,
        description: spec.description.clone(),
        seed,
        rng: RNG_ALGORITHM.to_string(),
        settings: *settings,
        orbits,
        counts,
        chaotic_fraction: counts.chaotic_fraction(),
        expected: spec.expected,
        expectation_met: spec.expected.map(|e| e.is_met(&counts)),
    };
    Ok(CaseRun {
        report,
        sections,
        lyapunov,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    G1d,
    Mu,
    J0,
    V0,
}

impl SweepParam {
    pub fn set(self, p: &mut OrbitParams, value: f64) {
        match self {
            SweepParam::G1d => p.g1d = value,
            SweepParam::Mu => p.mu = value,
            SweepParam::J0 => p.j0 = value,
            SweepParam::V0 => p.v0 = value,
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "g1d" | "g" => Ok(SweepParam::G1d),
            "mu" => Ok(SweepParam::Mu),
            "j0" => Ok(SweepParam::J0),
            "v0" => Ok(SweepParam::V0),
            _ => Err(Error::InvalidInput(format!("unknown sweep parameter '{s}' (use g1d, mu, j0 or v0)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub start: f64,
    pub end: f64,
    pub steps: usize,
}

impl SweepAxis {
    /// Evenly spaced values from `start` to `end` inclusive.
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        (0..self.steps)
            .map(|i| self.start + (self.end - self.start) * i as f64 / (self.steps - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axes: Vec<SweepAxis>,
    pub fixed: OrbitParams,
    pub orbits_per_cell: usize,
    pub seed: u64,
    /// Largest number of cells a sweep may contain.
    pub budget: usize,
}

pub const DEFAULT_SWEEP_BUDGET: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub index: usize,
    /// Position along each axis.
    pub position: Vec<usize>,
    pub params: OrbitParams,
    pub seed: u64,
    pub counts: Counts,
    pub chaotic_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub spec: SweepSpec,
    pub rng: String,
    pub settings: RunSettings,
    pub cells: Vec<SweepCell>,
}

impl SweepSpec {
    pub fn cell_count(&self) -> usize {
        self.axes.iter().map(|a| a.steps).product()
    }

    fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::InvalidInput(format!("a sweep needs one or two axes, got {}", self.axes.len())));
        }
        if self.axes.len() == 2 && self.axes[0].param == self.axes[1].param {
            return Err(Error::InvalidInput("sweep axes must vary different parameters".into()));
        }
        for a in &self.axes {
            if a.steps == 0 || !a.start.is_finite() || !a.end.is_finite() {
                return Err(Error::InvalidInput("sweep axes need finite bounds and at least one step".into()));
            }
        }
        if self.orbits_per_cell == 0 {
            return Err(Error::InvalidInput("orbits_per_cell must be positive".into()));
        }
        let cells = self.cell_count();
        if cells > self.budget {
            return Err(Error::BudgetExceeded {
                cells,
                budget: self.budget,
            });
        }
        Ok(())
    }

    /// Parameters and axis positions of every cell, first axis slowest.
    pub fn cells(&self) -> Vec<(Vec<usize>, OrbitParams)> {
        let values: Vec<Vec<f64>> = self.axes.iter().map(|a| a.values()).collect();
        let mut out = Vec::with_capacity(self.cell_count());
        let mut pos = vec![0usize; self.axes.len()];
        loop {
            let mut p = self.fixed;
            for (k, a) in self.axes.iter().enumerate() {
                a.param.set(&mut p, values[k][pos[k]]);
            }
            out.push((pos.clone(), p));
            // Odometer increment, last axis fastest.
            let mut k = self.axes.len();
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                pos[k] += 1;
                if pos[k] < self.axes[k].steps {
                    break;
                }
                pos[k] = 0;
            }
        }
    }
}

/// Chaotic fraction on every cell; cell `i` is a one-set case run with seed
/// `derive_seed(spec.seed, i)`. The budget is checked before any work.
pub fn run_sweep(spec: &SweepSpec, settings: &RunSettings) -> Result<SweepReport> {
    spec.validate()?;
    let mut cells = Vec::with_capacity(spec.cell_count());
    for (index, (position, params)) in spec.cells().into_iter().enumerate() {
        let seed = derive_seed(spec.seed, index as u64);
        let case = CaseSpec {
            id: 0,
            sets: vec![params],
            n_orbits: spec.orbits_per_cell,
            ic_half_width: 0.5,
            expected: None,
            description: format!("sweep cell {index}"),
        };
        let run = run_case(&case, seed, settings)?;
        cells.push(SweepCell {
            index,
            position,
            params,
            seed,
            counts: run.report.counts,
            chaotic_fraction: run.report.chaotic_fraction,
        });
    }
    Ok(SweepReport {
        spec: spec.clone(),
        rng: RNG_ALGORITHM.to_string(),
        settings: *settings,
        cells,
    })
}
