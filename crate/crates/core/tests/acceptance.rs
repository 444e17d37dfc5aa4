//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line and then
//! asserts the same condition.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use wslattice::chaos::{lyapunov_largest, two_trajectory_lyapunov, Label};
use wslattice::exact::{solve_balance, solve_balance_with, FamilySign, ThirdRelation};
use wslattice::experiments::{builtin_case, case_seed, run_case, CaseReport, Expectation, RunSettings};
use wslattice::gpe::{self, flow_density_grid, FieldGrid, DEFAULT_LATTICE_PERIODS, DEFAULT_POINTS};
use wslattice::model::LatticeParams;
use wslattice::modulus::{integrate, sample_profile, IntegrationOptions, ModulusState, OrbitParams, PERIOD};

fn verdict(criterion: u32, title: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    // Written to the stdout handle directly so the line shows even when the harness captures output.
    let line = format!("{tag} criterion {criterion} ({title}): {detail}\n");
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(pass, "criterion {criterion} ({title}) failed: {detail}");
}

const LATTICE_DEPTHS: [f64; 3] = [0.05, 0.2, 0.5];
const MASTER_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

#[test]
fn criterion_1_exact_solution_residual() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for v0 in LATTICE_DEPTHS {
        for (angle, sign) in [(0.0, FamilySign::Plus), (0.7, FamilySign::Minus), (2.1, FamilySign::Plus)] {
            let s = solve_balance(-1.0, v0, 1.0, angle, sign).unwrap();
            worst = worst.max(s.residual_stationary(512).unwrap());
        }
    }
    let elapsed = start.elapsed();
    verdict(
        1,
        "exact-solution residual",
        worst < 1e-10 && elapsed < Duration::from_secs(1),
        &format!("max residual {worst:.3e} (< 1e-10), runtime {elapsed:.2?} (< 1 s)"),
    );
}

/// `(1/pi) * integral over one lattice period of |phi|^2`, trapezoid on a periodic grid.
fn mean_density(density: impl Fn(f64) -> f64) -> f64 {
    let n = 4096;
    (0..n).map(|i| density(PI * i as f64 / n as f64)).sum::<f64>() / n as f64
}

#[test]
fn criterion_2_third_relation_resolution() {
    let xs: Vec<f64> = (0..2000).map(|i| 2.0 * PI * i as f64 / 2000.0).collect();
    let mut expansion_err: f64 = 0.0;
    let mut norm_err: f64 = 0.0;
    let mut printed_ratio_err: f64 = 0.0;
    let mut printed_fails = true;
    for v0 in LATTICE_DEPTHS {
        let good = solve_balance(-1.0, v0, 1.0, 0.4, FamilySign::Plus).unwrap();
        for &x in &xs {
            expansion_err = expansion_err.max((good.expanded_density(x) - good.exact_density(x)).abs());
        }
        let want = (good.mu - 1.0) / good.g1d;
        norm_err = norm_err.max((mean_density(|x| good.density(x)) - want).abs());

        let bad = solve_balance_with(ThirdRelation::Printed, -1.0, v0, 1.0, 0.4, FamilySign::Plus).unwrap();
        let bad_dev = xs
            .iter()
            .map(|&x| (bad.expanded_density(x) - bad.exact_density(x)).abs())
            .fold(0.0, f64::max);
        let bad_norm = (mean_density(|x| bad.density(x)) - want).abs();
        printed_fails &= bad_dev > 0.1 * v0 && bad_norm > 0.1 * v0;
        // Lattice modulation of the density: half of the required V0/|g1d|.
        let amp = |s: &wslattice::exact::BalancedSolution| {
            let (hi, lo) = xs.iter().map(|&x| s.density(x)).fold((f64::MIN, f64::MAX), |(h, l), d| (h.max(d), l.min(d)));
            (hi - lo) / 2.0
        };
        printed_ratio_err = printed_ratio_err.max((amp(&good) / amp(&bad) - 2.0).abs());
    }
    let pass = expansion_err < 1e-12 && norm_err < 1e-10 && printed_fails && printed_ratio_err < 1e-9;
    verdict(
        2,
        "third-relation resolution",
        pass,
        &format!(
            "2V0 relation: expansion error {expansion_err:.2e} (< 1e-12), per-well norm error {norm_err:.2e} (< 1e-10); \
             V0 relation fails: {printed_fails}, modulation ratio off 2 by {printed_ratio_err:.1e}"
        ),
    );
}

#[test]
fn criterion_3_modulus_tracks_closed_form() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let (g, n) = (-1.0, 1.0);
    for v0 in LATTICE_DEPTHS {
        let s = solve_balance(g, v0, n, 0.3, FamilySign::Plus).unwrap();
        let params = OrbitParams::new(g, s.mu, s.flow_constant(), v0).unwrap();
        let ic = ModulusState::new(s.density(0.0).sqrt(), 0.0, 0.0);
        let traj = integrate(&params, &ic, 100, 16, &IntegrationOptions::default()).unwrap();
        assert!(traj.termination.is_none());
        for p in &traj.samples {
            worst = worst.max((p.r - s.exact_density(p.xi).sqrt()).abs());
        }
    }
    let elapsed = start.elapsed();
    verdict(
        3,
        "modulus equation vs closed form",
        worst < 1e-6 && elapsed < Duration::from_secs(1),
        &format!("max |R - sqrt(density)| over 100 periods {worst:.2e} (< 1e-6), runtime {elapsed:.2?} (< 1 s)"),
    );
}

struct CaseSweep {
    /// `reports[seed_index][case_id - 1]`.
    reports: Vec<Vec<CaseReport>>,
    elapsed: Duration,
}

fn case_sweep() -> &'static CaseSweep {
    static SWEEP: OnceLock<CaseSweep> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let start = Instant::now();
        let settings = RunSettings::default();
        let reports = MASTER_SEEDS
            .iter()
            .map(|&seed| {
                (1..=10)
                    .map(|id| run_case(&builtin_case(id).unwrap(), case_seed(seed, id), &settings).unwrap().report)
                    .collect()
            })
            .collect();
        CaseSweep {
            reports,
            elapsed: start.elapsed(),
        }
    })
}

#[test]
fn criterion_4_case_reproduction() {
    let sweep = case_sweep();
    let mut failures = Vec::new();
    println!("case  seed  regular chaotic unbounded indeterminate  chaotic-fraction");
    for id in 1..=10u32 {
        let spec = builtin_case(id).unwrap();
        let per_seed: Vec<&CaseReport> = sweep.reports.iter().map(|r| &r[id as usize - 1]).collect();
        for (seed, r) in MASTER_SEEDS.iter().zip(&per_seed) {
            let c = &r.counts;
            println!(
                "{id:>4}  {seed:>4}  {:>7} {:>7} {:>9} {:>13}  {:.3}",
                c.regular, c.chaotic, c.unbounded, c.indeterminate, r.chaotic_fraction
            );
        }
        let expected = spec.expected.unwrap();
        let met = match expected {
            Expectation::Mixed => {
                let both = per_seed
                    .iter()
                    .filter(|r| r.counts.regular > 0 && r.counts.chaotic > 0)
                    .count();
                both >= 4
            }
            _ => per_seed.iter().all(|r| expected.is_met(&r.counts)),
        };
        let mean = per_seed.iter().map(|r| r.chaotic_fraction).sum::<f64>() / per_seed.len() as f64;
        println!("case {id}: expected {expected:?}, mean chaotic fraction {mean:.3}, met: {met}");
        if !met {
            failures.push(id);
        }
    }
    let on_time = sweep.elapsed < Duration::from_secs(300);
    verdict(
        4,
        "case reproduction",
        failures.is_empty() && on_time,
        &format!(
            "cases not reproduced: {failures:?}; {} master seeds in {:.1?} (target < 5 min)",
            MASTER_SEEDS.len(),
            sweep.elapsed
        ),
    );
}

#[test]
fn criterion_5_monotonic_trends() {
    // Cases 1-3 vary V0 at the Case-1 base; cases 3 and 4 vary J0 at V0 = 0.5.
    let reports = &case_sweep().reports[0];
    let f = |id: usize| reports[id - 1].chaotic_fraction;
    let along_v0 = [f(1), f(2), f(3)];
    let along_j0 = [f(3), f(4)];
    let v0_ok = along_v0.windows(2).all(|w| w[1] >= w[0]);
    let j0_ok = along_j0[1] <= along_j0[0];
    verdict(
        5,
        "monotonic trends",
        v0_ok && j0_ok,
        &format!(
            "seed {}: chaotic fraction along V0 {{0.05, 0.2, 0.5}} = {along_v0:?} (non-decreasing: {v0_ok}); \
             along J0 {{0.01, 0.16}} = {along_j0:?} (non-increasing: {j0_ok})",
            MASTER_SEEDS[0]
        ),
    );
}

fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn criterion_6_split_step_validation() {
    let (m, n) = (DEFAULT_LATTICE_PERIODS, DEFAULT_POINTS);
    let s = solve_balance(-1.0, 0.2, 1.0, 0.3, FamilySign::Plus).unwrap();
    let grid = FieldGrid::from_exact(&s, 0.0, m, n).unwrap();
    let dt = gpe::default_dt(m, n);
    let t_end = 10.0;
    let steps = (t_end / dt).round() as usize;
    let end = gpe::evolve(&grid, dt, steps).unwrap();
    let t = end.t;
    let norm_drift = (end.norm() - grid.norm()).abs() / grid.norm() / t;
    let rho0 = grid.density();
    let density_drift = end
        .density()
        .iter()
        .zip(&rho0)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    // Self-convergence under dt halving on a non-stationary state.
    let params = LatticeParams::new(0.5, -1.0, 0.0, 0.0, None).unwrap();
    let moving = FieldGrid::from_fn(params, m, n, |x| {
        Complex64::new(1.0 + 0.3 * (x / 2.0).cos(), 0.2 * (x / 4.0).sin())
    })
    .unwrap();
    let horizon = 0.5;
    let coarse = [0.01, 0.005, 0.0025];
    let runs: Vec<FieldGrid> = coarse
        .iter()
        .map(|&h| gpe::evolve(&moving, h, (horizon / h).round() as usize).unwrap())
        .collect();
    let e1 = max_abs_diff(&runs[0].values, &runs[1].values);
    let e2 = max_abs_diff(&runs[1].values, &runs[2].values);
    let ratio = e1 / e2;

    let pass = norm_drift < 1e-10 && density_drift < 1e-6 && (3.5..=4.5).contains(&ratio);
    verdict(
        6,
        "split-step validation",
        pass,
        &format!(
            "{m} lattice periods x {n} points, dt {dt:.3e}: norm drift {norm_drift:.2e}/unit time (< 1e-10), \
             stationary density drift {density_drift:.2e} over t = {t:.3} (< 1e-6), dt-halving error ratio {ratio:.3} (3.5-4.5)"
        ),
    );
}

#[test]
fn criterion_7_flow_grows_linearly() {
    let alpha = 0.1;
    let t: Vec<f64> = (0..=64).map(|i| i as f64 * 0.25).collect();
    let xi: Vec<f64> = (0..256).map(|j| 2.0 * PI * j as f64 / 256.0).collect();
    let mut worst: f64 = 0.0;
    let mut check = |r: &[f64], j0: f64, grid: &gpe::Grid2| {
        for (i, &ti) in t.iter().enumerate() {
            for (j, &rj) in r.iter().enumerate() {
                let want = j0 - alpha * rj * rj * ti;
                let scale = j0.abs().max(alpha * rj * rj * ti).max(f64::MIN_POSITIVE);
                worst = worst.max((grid.get(i, j) - want).abs() / scale);
            }
        }
        // Equal time steps give equal increments.
        for i in 2..t.len() {
            for j in 0..r.len() {
                let second = grid.get(i, j) - 2.0 * grid.get(i - 1, j) + grid.get(i - 2, j);
                let scale = alpha * r[j] * r[j] * t[i];
                worst = worst.max(second.abs() / scale);
            }
        }
    };
    // Chaotic Case-3 profile from the modulus equation.
    let p = OrbitParams::new(-1.0, -0.5, 0.01, 0.5).unwrap();
    let r = sample_profile(&p, &ModulusState::new(0.3, -0.2, 0.0), &xi, &IntegrationOptions::default()).unwrap();
    check(&r, p.j0, &flow_density_grid(&r, p.j0, alpha, &t));
    // Exact balanced profile, through the solution's own flow field.
    let s = solve_balance(-1.0, 0.2, 1.0, 0.3, FamilySign::Plus).unwrap();
    let r: Vec<f64> = xi.iter().map(|&x| s.density(x).sqrt()).collect();
    let flow = s.flow_field(alpha);
    let mut grid = gpe::Grid2::zeros(t.len(), xi.len());
    for (i, &ti) in t.iter().enumerate() {
        for (j, &x) in xi.iter().enumerate() {
            grid.set(i, j, flow.flow_density(x, ti));
        }
    }
    check(&r, s.flow_constant(), &grid);
    verdict(
        7,
        "linear flow acceleration",
        worst < 1e-13,
        &format!("max relative deviation from J0 - alpha R^2 t and from zero second difference {worst:.2e} (< 1e-13)"),
    );
}

#[test]
fn criterion_8_lyapunov_sanity() {
    let opts = IntegrationOptions::default();
    let s = solve_balance(-1.0, 0.5, 1.0, 0.3, FamilySign::Plus).unwrap();
    let exact = OrbitParams::new(-1.0, s.mu, s.flow_constant(), 0.5).unwrap();
    let exact_ic = ModulusState::new(s.density(0.0).sqrt(), 0.0, 0.0);
    let lambda_exact = lyapunov_largest(&exact, &exact_ic, 5000, PERIOD, &opts).unwrap().lambda;

    let case3 = OrbitParams::new(-1.0, -0.5, 0.01, 0.5).unwrap();
    let typical = ModulusState::new(0.1, 0.05, 0.0);
    let lambda_case3 = lyapunov_largest(&case3, &typical, 5000, PERIOD, &opts).unwrap().lambda;

    // Both estimators on every orbit the classifier calls chaotic in Case 3.
    let report = &case_sweep().reports[0][2];
    let mut worst_rel: f64 = 0.0;
    let mut compared = 0;
    for o in report.orbits.iter().filter(|o| o.label == Label::Chaotic) {
        let ic = ModulusState::new(o.initial[0], o.initial[1], 0.0);
        let var = lyapunov_largest(&case3, &ic, 5000, PERIOD, &opts).unwrap().lambda;
        let two = two_trajectory_lyapunov(&case3, &ic, 5000, 1e-8, &opts).unwrap().lambda;
        let rel = (two - var).abs() / var.abs();
        println!("  orbit {} ({:.4}, {:.4}): variational {var:.4}, two-trajectory {two:.4}", o.orbit_id, o.initial[0], o.initial[1]);
        worst_rel = worst_rel.max(rel);
        compared += 1;
    }
    let pass = lambda_exact.abs() <= 0.005 && lambda_case3 > 0.05 && compared > 0 && worst_rel < 0.2;
    verdict(
        8,
        "Lyapunov sanity",
        pass,
        &format!(
            "exact orbit lambda {lambda_exact:.2e} (|.| <= 0.005), Case-3 orbit lambda {lambda_case3:.4} (> 0.05), \
             estimator disagreement {:.1}% over {compared} chaotic orbits (< 20%)",
            100.0 * worst_rel
        ),
    );
}
