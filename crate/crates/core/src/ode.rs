//! Adaptive Dormand-Prince 8(5,3) integrator with 7th-order dense output.
//!
//! The stepper never steps past the requested target time, so stroboscopic
//! samples land on the section exactly instead of being interpolated.

use thiserror::Error;

/// System of first-order ODEs `dy/dt = f(t, y)` with a fixed-size state.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N], dydt: &mut [f64; N]);

    /// Step-size control uses only the leading `error_components()` entries of the state.
    fn error_components(&self) -> usize {
        N
    }
}

impl<const N: usize, F> OdeSystem<N> for F
where
    F: Fn(f64, &[f64; N], &mut [f64; N]),
{
    fn rhs(&self, t: f64, y: &[f64; N], dydt: &mut [f64; N]) {
        self(t, y, dydt)
    }
}

/// Mixed relative/absolute error tolerances.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rel: 1e-10,
            abs: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum StepError {
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("maximum number of steps ({max}) exceeded at t = {t}")]
    MaxSteps { t: f64, max: u64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub evals: u64,
    pub accepted: u64,
    pub rejected: u64,
}

/// Coefficients of the continuous extension of the last accepted step.
#[derive(Debug, Clone, Copy)]
struct DenseCoeffs<const N: usize> {
    t_old: f64,
    h: f64,
    cont: [[f64; N]; 8],
}

#[derive(Debug, Clone)]
pub struct Dop853<const N: usize> {
    tol: Tolerances,
    t: f64,
    y: [f64; N],
    f: [f64; N],
    h: f64,
    h_max: f64,
    facold: f64,
    max_steps: u64,
    dense_enabled: bool,
    dense: Option<DenseCoeffs<N>>,
    stats: Stats,
}

const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.333;
const FAC_MAX: f64 = 6.0;
const EXPO: f64 = 1.0 / 8.0;

impl<const N: usize> Dop853<N> {
    /// Start a new integration at `(t0, y0)`.
    pub fn new<S: OdeSystem<N>>(system: &S, t0: f64, y0: [f64; N], tol: Tolerances) -> Self {
        let mut f = [0.0; N];
        system.rhs(t0, &y0, &mut f);
        Self {
            tol,
            t: t0,
            y: y0,
            f,
            h: 0.0,
            h_max: f64::INFINITY,
            facold: 1e-4,
            max_steps: u64::MAX,
            dense_enabled: false,
            dense: None,
            stats: Stats {
                evals: 1,
                ..Stats::default()
            },
        }
    }

    pub fn with_dense_output(mut self, enabled: bool) -> Self {
        self.dense_enabled = enabled;
        self
    }

    pub fn with_max_step(mut self, h_max: f64) -> Self {
        self.h_max = h_max.abs();
        self
    }

    pub fn with_max_steps(mut self, max_steps: u64) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn with_initial_step(mut self, h: f64) -> Self {
        self.h = h.abs();
        self
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64; N] {
        &self.y
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    /// Magnitude of the step size the controller will try next.
    pub fn step_size(&self) -> f64 {
        self.h
    }

    /// Time interval `[t_old, t]` covered by the last accepted step.
    pub fn last_step_interval(&self) -> Option<(f64, f64)> {
        self.dense.as_ref().map(|d| (d.t_old, d.t_old + d.h))
    }

    /// Overwrite the current state, e.g. after renormalizing a tangent vector.
    /// Dense output of the previous step is discarded.
    pub fn reset_state<S: OdeSystem<N>>(&mut self, system: &S, y: [f64; N]) {
        self.y = y;
        system.rhs(self.t, &self.y, &mut self.f);
        self.stats.evals += 1;
        self.dense = None;
    }

    fn error_scale(&self, y_old: &[f64; N], y_new: &[f64; N], i: usize) -> f64 {
        self.tol.abs + self.tol.rel * y_old[i].abs().max(y_new[i].abs())
    }

    fn initial_step<S: OdeSystem<N>>(&mut self, system: &S, direction: f64, span: f64) -> f64 {
        let m = system.error_components();
        let mut dnf = 0.0;
        let mut dny = 0.0;
        for i in 0..m {
            let sk = self.tol.abs + self.tol.rel * self.y[i].abs();
            dnf += (self.f[i] / sk).powi(2);
            dny += (self.y[i] / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6
        } else {
            (dny / dnf).sqrt() * 0.01
        };
        h = h.min(self.h_max).min(span);
        let mut y1 = [0.0; N];
        for i in 0..N {
            y1[i] = self.y[i] + direction * h * self.f[i];
        }
        let mut f1 = [0.0; N];
        system.rhs(self.t + direction * h, &y1, &mut f1);
        self.stats.evals += 1;
        let mut der2 = 0.0;
        for i in 0..m {
            let sk = self.tol.abs + self.tol.rel * self.y[i].abs();
            der2 += ((f1[i] - self.f[i]) / sk).powi(2);
        }
        let der2 = der2.sqrt() / h;
        let der12 = der2.abs().max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / der12).powf(EXPO)
        };
        (100.0 * h).min(h1).min(self.h_max)
    }

    /// Take one accepted step toward `t_target`, never past it. Returns the new time.
    pub fn step<S: OdeSystem<N>>(&mut self, system: &S, t_target: f64) -> Result<f64, StepError> {
        let span = t_target - self.t;
        if span == 0.0 {
            return Ok(self.t);
        }
        let direction = span.signum();
        if self.h == 0.0 {
            self.h = self.initial_step(system, direction, span.abs());
        }
        loop {
            if self.stats.accepted + self.stats.rejected >= self.max_steps {
                return Err(StepError::MaxSteps {
                    t: self.t,
                    max: self.max_steps,
                });
            }
            let remaining = (t_target - self.t).abs();
            let mut h_abs = self.h.min(self.h_max);
            let last = h_abs >= remaining;
            if last {
                h_abs = remaining;
            }
            if !last && (h_abs <= f64::EPSILON * self.t.abs() || h_abs < f64::MIN_POSITIVE) {
                return Err(StepError::StepSizeUnderflow { t: self.t });
            }
            let h = direction * h_abs;
            let (y_new, err, stages) = self.trial_step(system, h);
            self.stats.evals += 11;
            if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
                // Shrink aggressively and retry; give up once the step underflows.
                self.stats.rejected += 1;
                self.h = h_abs * 0.1;
                if self.h <= f64::EPSILON * self.t.abs() || self.h < f64::MIN_POSITIVE {
                    return Err(StepError::NonFinite { t: self.t });
                }
                continue;
            }
            let fac11 = err.powf(EXPO);
            if err <= 1.0 {
                self.facold = err.max(1e-4);
                self.stats.accepted += 1;
                let t_new = if last { t_target } else { self.t + h };
                let mut f_new = [0.0; N];
                system.rhs(t_new, &y_new, &mut f_new);
                self.stats.evals += 1;
                if self.dense_enabled {
                    self.dense = Some(self.build_dense(system, h, &y_new, &f_new, &stages));
                } else {
                    self.dense = Some(DenseCoeffs {
                        t_old: self.t,
                        h,
                        cont: [[0.0; N]; 8],
                    });
                }
                let fac = (1.0 / FAC_MAX).max((1.0 / FAC_MIN).min(fac11 / SAFE));
                let h_new = h_abs / fac;
                // A step shortened to hit the target says little about the next one.
                if !(last && h_abs < self.h) {
                    self.h = h_new;
                }
                self.t = t_new;
                self.y = y_new;
                self.f = f_new;
                return Ok(self.t);
            }
            self.stats.rejected += 1;
            self.h = h_abs / (1.0 / FAC_MIN).min(fac11 / SAFE);
        }
    }

    /// Advance exactly to `t_target`.
    pub fn advance_to<S: OdeSystem<N>>(&mut self, system: &S, t_target: f64) -> Result<(), StepError> {
        while self.t != t_target {
            self.step(system, t_target)?;
        }
        Ok(())
    }

    /// Evaluate the continuous extension of the last accepted step at `t`.
    /// Requires dense output to be enabled.
    pub fn dense_output(&self, t: f64) -> Option<[f64; N]> {
        if !self.dense_enabled {
            return None;
        }
        let d = self.dense.as_ref()?;
        let s = (t - d.t_old) / d.h;
        let s1 = 1.0 - s;
        let c = &d.cont;
        let mut out = [0.0; N];
        for i in 0..N {
            let conpar = c[4][i] + (c[5][i] + (c[6][i] + c[7][i] * s) * s1) * s;
            out[i] = c[0][i] + (c[1][i] + (c[2][i] + (c[3][i] + conpar * s1) * s) * s1) * s;
        }
        Some(out)
    }

    fn trial_step<S: OdeSystem<N>>(&self, system: &S, h: f64) -> ([f64; N], f64, Stages<N>) {
        let t = self.t;
        let y = &self.y;
        let k1 = self.f;
        let mut k = Stages::<N>::new(k1);

        let comb = |terms: &[(f64, &[f64; N])]| -> [f64; N] {
            let mut out = *y;
            for (a, kk) in terms {
                let ah = a * h;
                for i in 0..N {
                    out[i] += ah * kk[i];
                }
            }
            out
        };

        let y2 = comb(&[(A21, &k.k1)]);
        system.rhs(t + C2 * h, &y2, &mut k.k2);
        let y3 = comb(&[(A31, &k.k1), (A32, &k.k2)]);
        system.rhs(t + C3 * h, &y3, &mut k.k3);
        let y4 = comb(&[(A41, &k.k1), (A43, &k.k3)]);
        system.rhs(t + C4 * h, &y4, &mut k.k4);
        let y5 = comb(&[(A51, &k.k1), (A53, &k.k3), (A54, &k.k4)]);
        system.rhs(t + C5 * h, &y5, &mut k.k5);
        let y6 = comb(&[(A61, &k.k1), (A64, &k.k4), (A65, &k.k5)]);
        system.rhs(t + C6 * h, &y6, &mut k.k6);
        let y7 = comb(&[(A71, &k.k1), (A74, &k.k4), (A75, &k.k5), (A76, &k.k6)]);
        system.rhs(t + C7 * h, &y7, &mut k.k7);
        let y8 = comb(&[(A81, &k.k1), (A84, &k.k4), (A85, &k.k5), (A86, &k.k6), (A87, &k.k7)]);
        system.rhs(t + C8 * h, &y8, &mut k.k8);
        let y9 = comb(&[
            (A91, &k.k1),
            (A94, &k.k4),
            (A95, &k.k5),
            (A96, &k.k6),
            (A97, &k.k7),
            (A98, &k.k8),
        ]);
        system.rhs(t + C9 * h, &y9, &mut k.k9);
        let y10 = comb(&[
            (A101, &k.k1),
            (A104, &k.k4),
            (A105, &k.k5),
            (A106, &k.k6),
            (A107, &k.k7),
            (A108, &k.k8),
            (A109, &k.k9),
        ]);
        system.rhs(t + C10 * h, &y10, &mut k.k10);
        let y11 = comb(&[
            (A111, &k.k1),
            (A114, &k.k4),
            (A115, &k.k5),
            (A116, &k.k6),
            (A117, &k.k7),
            (A118, &k.k8),
            (A119, &k.k9),
            (A1110, &k.k10),
        ]);
        system.rhs(t + C11 * h, &y11, &mut k.k11);
        let y12 = comb(&[
            (A121, &k.k1),
            (A124, &k.k4),
            (A125, &k.k5),
            (A126, &k.k6),
            (A127, &k.k7),
            (A128, &k.k8),
            (A129, &k.k9),
            (A1210, &k.k10),
            (A1211, &k.k11),
        ]);
        system.rhs(t + h, &y12, &mut k.k12);

        let m = system.error_components();
        let mut y_new = [0.0; N];
        let mut err = 0.0;
        let mut err2 = 0.0;
        for i in 0..N {
            let incr = B1 * k.k1[i]
                + B6 * k.k6[i]
                + B7 * k.k7[i]
                + B8 * k.k8[i]
                + B9 * k.k9[i]
                + B10 * k.k10[i]
                + B11 * k.k11[i]
                + B12 * k.k12[i];
            y_new[i] = y[i] + h * incr;
            if i >= m {
                continue;
            }
            let sk = self.error_scale(y, &y_new, i);
            let e2 = incr - BHH1 * k.k1[i] - BHH2 * k.k9[i] - BHH3 * k.k12[i];
            err2 += (e2 / sk).powi(2);
            let e = ER1 * k.k1[i]
                + ER6 * k.k6[i]
                + ER7 * k.k7[i]
                + ER8 * k.k8[i]
                + ER9 * k.k9[i]
                + ER10 * k.k10[i]
                + ER11 * k.k11[i]
                + ER12 * k.k12[i];
            err += (e / sk).powi(2);
        }
        let mut deno = err + 0.01 * err2;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let err = h.abs() * err * (1.0 / (deno * m as f64)).sqrt();
        (y_new, err, k)
    }

    fn build_dense<S: OdeSystem<N>>(
        &mut self,
        system: &S,
        h: f64,
        y_new: &[f64; N],
        f_new: &[f64; N],
        k: &Stages<N>,
    ) -> DenseCoeffs<N> {
        let t = self.t;
        let y = &self.y;
        let mut cont = [[0.0; N]; 8];
        for i in 0..N {
            let ydiff = y_new[i] - y[i];
            let bspl = h * k.k1[i] - ydiff;
            cont[0][i] = y[i];
            cont[1][i] = ydiff;
            cont[2][i] = bspl;
            cont[3][i] = ydiff - h * f_new[i] - bspl;
            cont[4][i] = D41 * k.k1[i]
                + D46 * k.k6[i]
                + D47 * k.k7[i]
                + D48 * k.k8[i]
                + D49 * k.k9[i]
                + D410 * k.k10[i]
                + D411 * k.k11[i]
                + D412 * k.k12[i];
            cont[5][i] = D51 * k.k1[i]
                + D56 * k.k6[i]
                + D57 * k.k7[i]
                + D58 * k.k8[i]
                + D59 * k.k9[i]
                + D510 * k.k10[i]
                + D511 * k.k11[i]
                + D512 * k.k12[i];
            cont[6][i] = D61 * k.k1[i]
                + D66 * k.k6[i]
                + D67 * k.k7[i]
                + D68 * k.k8[i]
                + D69 * k.k9[i]
                + D610 * k.k10[i]
                + D611 * k.k11[i]
                + D612 * k.k12[i];
            cont[7][i] = D71 * k.k1[i]
                + D76 * k.k6[i]
                + D77 * k.k7[i]
                + D78 * k.k8[i]
                + D79 * k.k9[i]
                + D710 * k.k10[i]
                + D711 * k.k11[i]
                + D712 * k.k12[i];
        }

        let mut y14 = *y;
        for i in 0..N {
            y14[i] += h
                * (A141 * k.k1[i]
                    + A147 * k.k7[i]
                    + A148 * k.k8[i]
                    + A149 * k.k9[i]
                    + A1410 * k.k10[i]
                    + A1411 * k.k11[i]
                    + A1412 * k.k12[i]
                    + A1413 * f_new[i]);
        }
        let mut k14 = [0.0; N];
        system.rhs(t + C14 * h, &y14, &mut k14);

        let mut y15 = *y;
        for i in 0..N {
            y15[i] += h
                * (A151 * k.k1[i]
                    + A156 * k.k6[i]
                    + A157 * k.k7[i]
                    + A158 * k.k8[i]
                    + A1511 * k.k11[i]
                    + A1512 * k.k12[i]
                    + A1513 * f_new[i]
                    + A1514 * k14[i]);
        }
        let mut k15 = [0.0; N];
        system.rhs(t + C15 * h, &y15, &mut k15);

        let mut y16 = *y;
        for i in 0..N {
            y16[i] += h
                * (A161 * k.k1[i]
                    + A166 * k.k6[i]
                    + A167 * k.k7[i]
                    + A168 * k.k8[i]
                    + A169 * k.k9[i]
                    + A1613 * f_new[i]
                    + A1614 * k14[i]
                    + A1615 * k15[i]);
        }
        let mut k16 = [0.0; N];
        system.rhs(t + C16 * h, &y16, &mut k16);
        self.stats.evals += 3;

        for i in 0..N {
            cont[4][i] = h * (cont[4][i] + D413 * f_new[i] + D414 * k14[i] + D415 * k15[i] + D416 * k16[i]);
            cont[5][i] = h * (cont[5][i] + D513 * f_new[i] + D514 * k14[i] + D515 * k15[i] + D516 * k16[i]);
            cont[6][i] = h * (cont[6][i] + D613 * f_new[i] + D614 * k14[i] + D615 * k15[i] + D616 * k16[i]);
            cont[7][i] = h * (cont[7][i] + D713 * f_new[i] + D714 * k14[i] + D715 * k15[i] + D716 * k16[i]);
        }
        DenseCoeffs { t_old: t, h, cont }
    }
}

#[derive(Clone, Copy)]
struct Stages<const N: usize> {
    k1: [f64; N],
    k2: [f64; N],
    k3: [f64; N],
    k4: [f64; N],
    k5: [f64; N],
    k6: [f64; N],
    k7: [f64; N],
    k8: [f64; N],
    k9: [f64; N],
    k10: [f64; N],
    k11: [f64; N],
    k12: [f64; N],
}

impl<const N: usize> Stages<N> {
    fn new(k1: [f64; N]) -> Self {
        let z = [0.0; N];
        Self {
            k1,
            k2: z,
            k3: z,
            k4: z,
            k5: z,
            k6: z,
            k7: z,
            k8: z,
            k9: z,
            k10: z,
            k11: z,
            k12: z,
        }
    }
}

// Butcher tableau (Hairer & Wanner, DOP853).
const C2: f64 = 0.526001519587677318785587544488E-01;
const C3: f64 = 0.789002279381515978178381316732E-01;
const C4: f64 = 0.118350341907227396726757197510E+00;
const C5: f64 = 0.281649658092772603273242802490E+00;
const C6: f64 = 0.333333333333333333333333333333E+00;
const C7: f64 = 0.25E+00;
const C8: f64 = 0.307692307692307692307692307692E+00;
const C9: f64 = 0.651282051282051282051282051282E+00;
const C10: f64 = 0.6E+00;
const C11: f64 = 0.857142857142857142857142857142E+00;
const C14: f64 = 0.1E+00;
const C15: f64 = 0.2E+00;
const C16: f64 = 0.777777777777777777777777777778E+00;

const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;
const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;
const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;

const A141: f64 = 5.61675022830479523392909219681E-2;
const A147: f64 = 2.53500210216624811088794765333E-1;
const A148: f64 = -2.46239037470802489917441475441E-1;
const A149: f64 = -1.24191423263816360469010140626E-1;
const A1410: f64 = 1.5329179827876569731206322685E-1;
const A1411: f64 = 8.20105229563468988491666602057E-3;
const A1412: f64 = 7.56789766054569976138603589584E-3;
const A1413: f64 = -8.298E-3;
const A151: f64 = 3.18346481635021405060768473261E-2;
const A156: f64 = 2.83009096723667755288322961402E-2;
const A157: f64 = 5.35419883074385676223797384372E-2;
const A158: f64 = -5.49237485713909884646569340306E-2;
const A1511: f64 = -1.08347328697249322858509316994E-4;
const A1512: f64 = 3.82571090835658412954920192323E-4;
const A1513: f64 = -3.40465008687404560802977114492E-4;
const A1514: f64 = 1.41312443674632500278074618366E-1;
const A161: f64 = -4.28896301583791923408573538692E-1;
const A166: f64 = -4.69762141536116384314449447206E0;
const A167: f64 = 7.68342119606259904184240953878E0;
const A168: f64 = 4.06898981839711007970213554331E0;
const A169: f64 = 3.56727187455281109270669543021E-1;
const A1613: f64 = -1.39902416515901462129418009734E-3;
const A1614: f64 = 2.9475147891527723389556272149E0;
const A1615: f64 = -9.15095847217987001081870187138E0;

const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;

const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;

const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;

const D41: f64 = -0.84289382761090128651353491142E+01;
const D46: f64 = 0.56671495351937776962531783590E+00;
const D47: f64 = -0.30689499459498916912797304727E+01;
const D48: f64 = 0.23846676565120698287728149680E+01;
const D49: f64 = 0.21170345824450282767155149946E+01;
const D410: f64 = -0.87139158377797299206789907490E+00;
const D411: f64 = 0.22404374302607882758541771650E+01;
const D412: f64 = 0.63157877876946881815570249290E+00;
const D413: f64 = -0.88990336451333310820698117400E-01;
const D414: f64 = 0.18148505520854727256656404962E+02;
const D415: f64 = -0.91946323924783554000451984436E+01;
const D416: f64 = -0.44360363875948939664310572000E+01;

const D51: f64 = 0.10427508642579134603413151009E+02;
const D56: f64 = 0.24228349177525818288430175319E+03;
const D57: f64 = 0.16520045171727028198505394887E+03;
const D58: f64 = -0.37454675472269020279518312152E+03;
const D59: f64 = -0.22113666853125306036270938578E+02;
const D510: f64 = 0.77334326684722638389603898808E+01;
const D511: f64 = -0.30674084731089398182061213626E+02;
const D512: f64 = -0.93321305264302278729567221706E+01;
const D513: f64 = 0.15697238121770843886131091075E+02;
const D514: f64 = -0.31139403219565177677282850411E+02;
const D515: f64 = -0.93529243588444783865713862664E+01;
const D516: f64 = 0.35816841486394083752465898540E+02;

const D61: f64 = 0.19985053242002433820987653617E+02;
const D66: f64 = -0.38703730874935176555105901742E+03;
const D67: f64 = -0.18917813819516756882830838328E+03;
const D68: f64 = 0.52780815920542364900561016686E+03;
const D69: f64 = -0.11573902539959630126141871134E+02;
const D610: f64 = 0.68812326946963000169666922661E+01;
const D611: f64 = -0.10006050966910838403183860980E+01;
const D612: f64 = 0.77771377980534432092869265740E+00;
const D613: f64 = -0.27782057523535084065932004339E+01;
const D614: f64 = -0.60196695231264120758267380846E+02;
const D615: f64 = 0.84320405506677161018159903784E+02;
const D616: f64 = 0.11992291136182789328035130030E+02;

const D71: f64 = -0.25693933462703749003312586129E+02;
const D76: f64 = -0.15418974869023643374053993627E+03;
const D77: f64 = -0.23152937917604549567536039109E+03;
const D78: f64 = 0.35763911791061412378285349910E+03;
const D79: f64 = 0.93405324183624310003907691704E+02;
const D710: f64 = -0.37458323136451633156875139351E+02;
const D711: f64 = 0.10409964950896230045147246184E+03;
const D712: f64 = 0.29840293426660503123344363579E+02;
const D713: f64 = -0.43533456590011143754432175058E+02;
const D714: f64 = 0.96324553959188282948394950600E+02;
const D715: f64 = -0.39177261675615439165231486172E+02;
const D716: f64 = -0.14972683625798562581422125276E+03;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn harmonic(_t: f64, y: &[f64; 2], dy: &mut [f64; 2]) {
        dy[0] = y[1];
        dy[1] = -y[0];
    }

    #[test]
    fn harmonic_oscillator_lands_on_target() {
        let mut s = Dop853::new(&harmonic, 0.0, [1.0, 0.0], Tolerances::default());
        let target = 10.0 * std::f64::consts::PI;
        s.advance_to(&harmonic, target).unwrap();
        assert_eq!(s.t(), target);
        assert_relative_eq!(s.y()[0], 1.0, epsilon = 1e-9);
        assert!(s.y()[1].abs() < 1e-9);
    }

    #[test]
    fn backward_integration() {
        let mut s = Dop853::new(&harmonic, 0.0, [1.0, 0.0], Tolerances::default());
        s.advance_to(&harmonic, -2.0).unwrap();
        assert_relative_eq!(s.y()[0], (2.0f64).cos(), epsilon = 1e-10);
        assert_relative_eq!(s.y()[1], (2.0f64).sin(), epsilon = 1e-10);
    }

    #[test]
    fn dense_output_matches_exact_solution() {
        let mut s = Dop853::new(&harmonic, 0.0, [1.0, 0.0], Tolerances::default())
            .with_dense_output(true);
        let mut worst: f64 = 0.0;
        while s.t() < 5.0 {
            s.step(&harmonic, 5.0).unwrap();
            let (a, b) = s.last_step_interval().unwrap();
            for j in 1..8 {
                let t = a + (b - a) * j as f64 / 8.0;
                let y = s.dense_output(t).unwrap();
                worst = worst.max((y[0] - t.cos()).abs());
            }
        }
        assert!(worst < 1e-8, "dense output error {worst}");
    }

    #[test]
    fn exponential_growth_tracks_closed_form() {
        let f = |_t: f64, y: &[f64; 1], dy: &mut [f64; 1]| dy[0] = y[0];
        let mut s = Dop853::new(&f, 0.0, [1.0], Tolerances::default());
        s.advance_to(&f, 3.0).unwrap();
        assert_relative_eq!(s.y()[0], 3.0f64.exp(), max_relative = 1e-9);
    }
}
