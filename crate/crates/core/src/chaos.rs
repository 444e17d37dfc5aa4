//! Orbit classification: largest Lyapunov exponent from the tangent flow plus
//! box-counting occupancy of the stroboscopic section.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::modulus::{
    check_section_request, IntegrationOptions, ModulusFlow, ModulusState, OrbitParams, PeriodDriver,
    PoincareSection, SectionBuilder, TangentFlow, Termination, TerminationKind, PERIOD,
};
use crate::{Error, Result};

/// Orbits must survive this many drive periods for an exponent to be reported.
pub const MIN_LYAPUNOV_PERIODS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Exponent per unit `xi`.
    pub lambda: f64,
    /// Running estimate after each renormalization.
    pub convergence_history: Vec<f64>,
    pub renorm_interval: f64,
}

impl LyapunovEstimate {
    fn from_history(history: Vec<f64>, renorm_interval: f64) -> Self {
        let tail = &history[history.len() / 2..];
        let lambda = tail.iter().sum::<f64>() / tail.len() as f64;
        Self {
            lambda,
            convergence_history: history,
            renorm_interval,
        }
    }
}

/// Accumulates `ln` growth factors and the running exponent.
struct GrowthLog {
    sum: f64,
    elapsed: f64,
    history: Vec<f64>,
}

impl GrowthLog {
    fn new(capacity: usize) -> Self {
        Self {
            sum: 0.0,
            elapsed: 0.0,
            history: Vec::with_capacity(capacity),
        }
    }

    fn push(&mut self, growth: f64, interval: f64) {
        self.sum += growth.ln();
        self.elapsed += interval;
        self.history.push(self.sum / self.elapsed);
    }

    fn finish(self, renorm_interval: f64) -> Option<LyapunovEstimate> {
        (!self.history.is_empty()).then(|| LyapunovEstimate::from_history(self.history, renorm_interval))
    }
}

fn check_lyapunov_request(n_intervals: usize, interval: f64) -> Result<()> {
    if !(interval.is_finite() && interval != 0.0) {
        return Err(Error::InvalidInput(format!("renormalization interval must be non-zero, got {interval}")));
    }
    if (n_intervals as f64) * interval.abs() < MIN_LYAPUNOV_PERIODS as f64 * PERIOD {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_LYAPUNOV_PERIODS} drive periods for an exponent"
        )));
    }
    Ok(())
}

const TANGENT_LIMIT: f64 = 1e150;

fn tangent_norm(y: &[f64; 4]) -> f64 {
    y[2].hypot(y[3])
}

/// Variational estimate over `n_intervals` intervals of signed length `interval`.
fn variational(
    params: &OrbitParams,
    initial: &ModulusState,
    n_intervals: usize,
    interval: f64,
    opts: &IntegrationOptions,
) -> Result<LyapunovEstimate> {
    check_lyapunov_request(n_intervals, interval)?;
    let opts = IntegrationOptions { xi0: initial.xi, ..*opts };
    let flow = TangentFlow(*params);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut driver = PeriodDriver::new(&flow, params, [initial.r, initial.r_xi, s, s], opts, false)?;
    let mut log = GrowthLog::new(n_intervals);
    for k in 1..=n_intervals {
        if let Err(t) = driver.advance_interval(k, interval) {
            if tangent_norm(driver.y()) > TANGENT_LIMIT || !tangent_norm(driver.y()).is_finite() {
                return Err(Error::TangentOverflow { xi: t.xi });
            }
            return Err(early_termination(&t));
        }
        let y = *driver.y();
        let norm = tangent_norm(&y);
        if !norm.is_finite() || norm > TANGENT_LIMIT {
            return Err(Error::TangentOverflow { xi: driver.xi() });
        }
        log.push(norm, interval.abs());
        driver.reset([y[0], y[1], y[2] / norm, y[3] / norm]);
    }
    Ok(log.finish(interval.abs()).expect("at least one interval"))
}

fn early_termination(t: &Termination) -> Error {
    let reason = match t.kind {
        TerminationKind::Escape => "escape",
        TerminationKind::Singularity => "singularity",
    };
    Error::EarlyTermination {
        reason: format!("{reason} at xi = {}", t.xi),
        periods: t.completed_periods,
    }
}

/// Largest Lyapunov exponent from the tangent flow, renormalized every
/// `renorm_interval` over `n_periods` drive periods.
pub fn lyapunov_largest(
    params: &OrbitParams,
    initial: &ModulusState,
    n_periods: usize,
    renorm_interval: f64,
    opts: &IntegrationOptions,
) -> Result<LyapunovEstimate> {
    let n = intervals_for(n_periods, renorm_interval)?;
    variational(params, initial, n, renorm_interval.abs(), opts)
}

/// Same as [`lyapunov_largest`] but integrating toward decreasing `xi`.
pub fn lyapunov_backward(
    params: &OrbitParams,
    initial: &ModulusState,
    n_periods: usize,
    renorm_interval: f64,
    opts: &IntegrationOptions,
) -> Result<LyapunovEstimate> {
    let n = intervals_for(n_periods, renorm_interval)?;
    variational(params, initial, n, -renorm_interval.abs(), opts)
}

fn intervals_for(n_periods: usize, interval: f64) -> Result<usize> {
    if !(interval.is_finite() && interval != 0.0) {
        return Err(Error::InvalidInput(format!("renormalization interval must be non-zero, got {interval}")));
    }
    Ok((n_periods as f64 * PERIOD / interval.abs()).round() as usize)
}

/// Two-trajectory (Benettin) estimate: a companion orbit at distance `d0`
/// is pulled back along the separation after every drive period.
pub fn two_trajectory_lyapunov(
    params: &OrbitParams,
    initial: &ModulusState,
    n_periods: usize,
    d0: f64,
    opts: &IntegrationOptions,
) -> Result<LyapunovEstimate> {
    check_lyapunov_request(n_periods, PERIOD)?;
    if !(d0 > 0.0 && d0.is_finite()) {
        return Err(Error::InvalidInput(format!("initial separation must be positive, got {d0}")));
    }
    let opts = IntegrationOptions { xi0: initial.xi, ..*opts };
    let flow = ModulusFlow(*params);
    let s = d0 * std::f64::consts::FRAC_1_SQRT_2;
    let mut a = PeriodDriver::new(&flow, params, [initial.r, initial.r_xi], opts, false)?;
    let mut b = PeriodDriver::new(&flow, params, [initial.r + s, initial.r_xi + s], opts, false)?;
    let mut log = GrowthLog::new(n_periods);
    for k in 1..=n_periods {
        if let Err(t) = a.advance_period(k).and_then(|_| b.advance_period(k)) {
            return Err(early_termination(&t));
        }
        let (ya, yb) = (*a.y(), *b.y());
        let d = (yb[0] - ya[0]).hypot(yb[1] - ya[1]);
        if d == 0.0 || !d.is_finite() {
            return Err(Error::TangentOverflow { xi: a.xi() });
        }
        log.push(d / d0, PERIOD);
        let f = d0 / d;
        b.reset([ya[0] + f * (yb[0] - ya[0]), ya[1] + f * (yb[1] - ya[1])]);
    }
    Ok(log.finish(PERIOD).expect("at least one period"))
}

/// Bounding-box extents below this (times `max(1, |coordinate|)`) count as
/// degenerate, so integration jitter around a fixed point stays in one box.
pub const DEGENERATE_EXTENT: f64 = 1e-6;

/// Fraction of occupied boxes on a `resolution x resolution` grid over the
/// bounding box of `points`. A degenerate axis collapses to a single bin, so
/// a fixed point occupies exactly one box.
pub fn section_occupancy(points: &[(f64, f64)], resolution: usize) -> Result<f64> {
    if points.len() < 100 {
        return Err(Error::InvalidInput(format!(
            "occupancy needs at least 100 section points, got {}",
            points.len()
        )));
    }
    if resolution == 0 {
        return Err(Error::InvalidInput("grid resolution must be positive".into()));
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let bin = |v: f64, lo: f64, hi: f64| -> usize {
        if hi - lo <= DEGENERATE_EXTENT * lo.abs().max(hi.abs()).max(1.0) {
            return 0;
        }
        (((v - lo) / (hi - lo) * resolution as f64) as usize).min(resolution - 1)
    };
    let boxes: HashSet<(usize, usize)> = points.iter().map(|&(x, y)| (bin(x, x0, x1), bin(y, y0, y1))).collect();
    Ok(boxes.len() as f64 / (resolution * resolution) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub lambda_hi: f64,
    pub lambda_lo: f64,
    pub occupancy_hi: f64,
    pub occupancy_lo: f64,
    pub min_samples: usize,
    pub grid_resolution: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            lambda_hi: 0.02,
            lambda_lo: 0.005,
            occupancy_hi: 0.2,
            occupancy_lo: 0.1,
            min_samples: 1000,
            grid_resolution: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Regular,
    Chaotic,
    Unbounded,
    Indeterminate,
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Label::Regular => "regular",
            Label::Chaotic => "chaotic",
            Label::Unbounded => "unbounded",
            Label::Indeterminate => "indeterminate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitClass {
    pub label: Label,
    /// `None` when no exponent could be estimated; `+inf` for tangent overflow.
    pub lambda: Option<f64>,
    pub occupancy: Option<f64>,
    pub thresholds: Thresholds,
}

/// Outcome of the exponent computation attached to an analyzed orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LyapunovOutcome {
    Estimate(LyapunovEstimate),
    Overflow { xi: f64 },
    Unavailable { reason: String },
}

impl LyapunovOutcome {
    /// Exponent used for classification; overflow counts as unbounded growth.
    pub fn lambda(&self) -> Option<f64> {
        match self {
            LyapunovOutcome::Estimate(e) => Some(e.lambda),
            LyapunovOutcome::Overflow { .. } => Some(f64::INFINITY),
            LyapunovOutcome::Unavailable { .. } => None,
        }
    }
}

/// Apply the dual-evidence rule to a section and an exponent.
pub fn classify(section: &PoincareSection, lambda: Option<f64>, thresholds: &Thresholds) -> OrbitClass {
    let escaped = matches!(section.termination, Some(t) if t.kind == TerminationKind::Escape);
    let points: Vec<(f64, f64)> = section.points().collect();
    let occupancy = section_occupancy(&points, thresholds.grid_resolution).ok();
    let mut class = OrbitClass {
        label: Label::Indeterminate,
        lambda,
        occupancy,
        thresholds: *thresholds,
    };
    if escaped {
        class.label = Label::Unbounded;
        return class;
    }
    if section.samples.len() < thresholds.min_samples {
        return class;
    }
    let (lam, occ) = (lambda.unwrap_or(f64::NAN), occupancy.unwrap_or(f64::NAN));
    class.label = if lam > thresholds.lambda_hi && occ > thresholds.occupancy_hi {
        Label::Chaotic
    } else if lam < thresholds.lambda_lo || occ < thresholds.occupancy_lo {
        Label::Regular
    } else {
        Label::Indeterminate
    };
    class
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitAnalysis {
    pub section: PoincareSection,
    pub lyapunov: LyapunovOutcome,
    pub class: OrbitClass,
}

/// Section, exponent and label from a single pass of the tangent flow,
/// renormalizing at every section crossing.
pub fn analyze_orbit(
    params: &OrbitParams,
    initial: &ModulusState,
    n_periods: usize,
    drop: usize,
    opts: &IntegrationOptions,
    thresholds: &Thresholds,
) -> Result<OrbitAnalysis> {
    check_section_request(n_periods, drop)?;
    let opts = IntegrationOptions { xi0: initial.xi, ..*opts };
    let flow = TangentFlow(*params);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut driver = PeriodDriver::new(&flow, params, [initial.r, initial.r_xi, s, s], opts, false)?;
    let mut builder = SectionBuilder::new(n_periods, drop);
    let mut log = GrowthLog::new(n_periods);
    let mut termination = None;
    let mut overflow = None;
    for k in 1..=n_periods {
        if let Err(t) = driver.advance_period(k) {
            if !(tangent_norm(driver.y()) <= TANGENT_LIMIT) {
                overflow = Some(t.xi);
            }
            termination = Some(t);
            break;
        }
        let y = *driver.y();
        builder.record(k, y[0], y[1]);
        let norm = tangent_norm(&y);
        if !(norm <= TANGENT_LIMIT) {
            overflow = Some(driver.xi());
            // Keep the section going with a fresh tangent vector.
            driver.reset([y[0], y[1], s, s]);
            continue;
        }
        log.push(norm, PERIOD);
        driver.reset([y[0], y[1], y[2] / norm, y[3] / norm]);
    }
    let section = builder.finish(params, initial, n_periods, termination);
    let survived = termination.map_or(n_periods, |t| t.completed_periods);
    let lyapunov = if let Some(xi) = overflow {
        LyapunovOutcome::Overflow { xi }
    } else if survived < MIN_LYAPUNOV_PERIODS.min(n_periods) {
        LyapunovOutcome::Unavailable {
            reason: format!("orbit terminated after {survived} periods"),
        }
    } else {
        match log.finish(PERIOD) {
            Some(e) => LyapunovOutcome::Estimate(e),
            None => LyapunovOutcome::Unavailable {
                reason: "no completed period".into(),
            },
        }
    };
    let class = classify(&section, lyapunov.lambda(), thresholds);
    Ok(OrbitAnalysis {
        section,
        lyapunov,
        class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{solve_balance, FamilySign};
    use crate::modulus::{poincare_section, SectionPoint};

    fn exact_orbit() -> (OrbitParams, ModulusState) {
        let (g, v0, n) = (-1.0, 0.5, 1.0);
        let s = solve_balance(g, v0, n, 0.3, FamilySign::Plus).unwrap();
        let params = OrbitParams::new(g, s.mu, s.flow_constant(), v0).unwrap();
        (params, ModulusState::new((n - v0 / g).sqrt(), 0.0, 0.0))
    }

    fn case3() -> OrbitParams {
        OrbitParams::new(-1.0, -0.5, 0.01, 0.5).unwrap()
    }

    #[test]
    fn exact_orbit_has_vanishing_exponent() {
        let (p, ic) = exact_orbit();
        let est = lyapunov_largest(&p, &ic, 2000, PERIOD, &IntegrationOptions::default()).unwrap();
        assert!(est.lambda.abs() < 0.005, "lambda = {}", est.lambda);
        assert_eq!(est.convergence_history.len(), 2000);
        assert_eq!(est.renorm_interval, PERIOD);
    }

    #[test]
    fn chaotic_orbit_has_positive_exponent_and_estimators_agree() {
        let p = case3();
        let ic = ModulusState::new(0.1, 0.05, 0.0);
        let opts = IntegrationOptions::default();
        let var = lyapunov_largest(&p, &ic, 3000, PERIOD, &opts).unwrap();
        assert!(var.lambda > 0.05, "lambda = {}", var.lambda);
        let two = two_trajectory_lyapunov(&p, &ic, 3000, 1e-8, &opts).unwrap();
        let rel = (two.lambda - var.lambda).abs() / var.lambda;
        assert!(rel < 0.2, "variational {} vs two-trajectory {}", var.lambda, two.lambda);
        // Renormalizing more often does not bias the estimate.
        let half = lyapunov_largest(&p, &ic, 3000, PERIOD / 2.0, &opts).unwrap();
        assert!((half.lambda - var.lambda).abs() < 0.2 * var.lambda);
    }

    #[test]
    fn reversed_regular_orbit_mirrors_exponent() {
        let (p, exact) = exact_orbit();
        let ic = ModulusState::new(exact.r + 0.05, 0.02, 0.0);
        let opts = IntegrationOptions::default();
        let fwd = lyapunov_largest(&p, &ic, 1000, PERIOD, &opts).unwrap();
        let bwd = lyapunov_backward(&p, &ic, 1000, PERIOD, &opts).unwrap();
        assert!((fwd.lambda + bwd.lambda).abs() < 0.01, "{} {}", fwd.lambda, bwd.lambda);
    }

    #[test]
    fn short_or_escaping_runs_are_rejected() {
        let (p, ic) = exact_orbit();
        let opts = IntegrationOptions::default();
        assert!(matches!(lyapunov_largest(&p, &ic, 100, PERIOD, &opts), Err(Error::InvalidInput(_))));
        let lin = OrbitParams::new(0.0, -1.0, 0.0, 0.0).unwrap();
        let err = lyapunov_largest(&lin, &ModulusState::new(1.0, 0.0, 0.0), 600, PERIOD, &opts).unwrap_err();
        assert!(matches!(err, Error::EarlyTermination { periods: 2, .. }), "{err:?}");
    }

    #[test]
    fn occupancy_of_synthetic_shapes() {
        let fixed = vec![(0.7, -0.1); 500];
        assert!((section_occupancy(&fixed, 64).unwrap() - 1.0 / 4096.0).abs() < 1e-15);
        let line: Vec<(f64, f64)> = (0..5000).map(|i| (i as f64 / 4999.0, 0.3)).collect();
        assert!((section_occupancy(&line, 64).unwrap() - 1.0 / 64.0).abs() < 1e-15);
        let diag: Vec<(f64, f64)> = (0..5000).map(|i| (i as f64, 2.0 * i as f64)).collect();
        assert!((section_occupancy(&diag, 64).unwrap() - 1.0 / 64.0).abs() < 1e-15);
        let circle: Vec<(f64, f64)> = (0..5000).map(|i| (i as f64 * 0.1).sin_cos()).collect();
        assert!(section_occupancy(&circle, 64).unwrap() < 0.1);
        assert!(section_occupancy(&fixed[..99], 64).is_err());
    }

    #[test]
    fn exact_orbit_section_is_one_box() {
        let (p, ic) = exact_orbit();
        let sec = poincare_section(&p, &ic, 300, 100, &IntegrationOptions::default()).unwrap();
        let pts: Vec<_> = sec.points().collect();
        assert!((section_occupancy(&pts, 64).unwrap() - 1.0 / 4096.0).abs() < 1e-15);
        let lam = lyapunov_largest(&p, &ic, 600, PERIOD, &IntegrationOptions::default()).unwrap().lambda;
        let class = classify(&sec, Some(lam), &Thresholds { min_samples: 100, ..Default::default() });
        assert_eq!(class.label, Label::Regular);
    }

    fn synthetic_section(points: Vec<(f64, f64)>, termination: Option<Termination>) -> PoincareSection {
        PoincareSection {
            samples: points
                .into_iter()
                .enumerate()
                .map(|(k, (r, r_xi))| SectionPoint { k, r, r_xi })
                .collect(),
            dropped_transient: 0,
            requested_periods: 0,
            params: case3(),
            initial: ModulusState::new(0.1, 0.0, 0.0),
            termination,
        }
    }

    #[test]
    fn classification_rules() {
        let t = Thresholds::default();
        let circle: Vec<(f64, f64)> = (0..2000).map(|i| (i as f64 * 0.1).sin_cos()).collect();
        let cloud: Vec<(f64, f64)> = (0..4096).map(|i| ((i % 64) as f64, (i / 64) as f64)).collect();
        assert_eq!(classify(&synthetic_section(circle.clone(), None), Some(0.0), &t).label, Label::Regular);
        // Thin curve overrides a spurious exponent.
        assert_eq!(classify(&synthetic_section(circle, None), Some(0.1), &t).label, Label::Regular);
        assert_eq!(classify(&synthetic_section(cloud.clone(), None), Some(0.1), &t).label, Label::Chaotic);
        assert_eq!(classify(&synthetic_section(cloud.clone(), None), Some(0.01), &t).label, Label::Indeterminate);
        assert_eq!(classify(&synthetic_section(cloud.clone(), None), Some(0.001), &t).label, Label::Regular);
        assert_eq!(classify(&synthetic_section(cloud.clone(), None), None, &t).label, Label::Indeterminate);
        assert_eq!(
            classify(&synthetic_section(cloud[..500].to_vec(), None), Some(0.1), &t).label,
            Label::Indeterminate
        );
        let esc = Termination {
            kind: TerminationKind::Escape,
            xi: 1.0,
            r: 2e3,
            r_xi: 0.0,
            completed_periods: 0,
        };
        let c = classify(&synthetic_section(vec![], Some(esc)), None, &t);
        assert_eq!(c.label, Label::Unbounded);
        assert_eq!(c.occupancy, None);
    }

    #[test]
    fn mirrored_initial_condition_gets_the_same_label() {
        let p = case3();
        let opts = IntegrationOptions::default();
        let t = Thresholds::default();
        for ic in [ModulusState::new(0.3, -0.2, 0.0), ModulusState::new(0.1, 0.05, 0.0)] {
            let a = analyze_orbit(&p, &ic, 1600, 100, &opts, &t).unwrap();
            let b = analyze_orbit(&p, &ic.mirrored(), 1600, 100, &opts, &t).unwrap();
            assert_eq!(a.class.label, b.class.label);
            assert_eq!(a.class.lambda.unwrap().to_bits(), b.class.lambda.unwrap().to_bits());
        }
    }

    #[test]
    fn single_pass_matches_separate_runs() {
        let p = case3();
        let ic = ModulusState::new(0.1, 0.05, 0.0);
        let opts = IntegrationOptions::default();
        let a = analyze_orbit(&p, &ic, 1200, 100, &opts, &Thresholds::default()).unwrap();
        assert_eq!(a.section.samples.len(), 1100);
        let sep = lyapunov_largest(&p, &ic, 1200, PERIOD, &opts).unwrap();
        let LyapunovOutcome::Estimate(e) = &a.lyapunov else { panic!("{:?}", a.lyapunov) };
        assert_eq!(e.lambda, sep.lambda);
        assert_eq!(a.class.label, Label::Chaotic);
    }
}
