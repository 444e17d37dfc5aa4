//! Fourier helpers on uniform periodic grids.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Angular wavenumbers in FFT order for `n` points over a period `length`.
pub fn wavenumbers(n: usize, length: f64) -> Vec<f64> {
    let dk = 2.0 * PI / length;
    (0..n)
        .map(|j| {
            let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            m * dk
        })
        .collect()
}

/// Uniform grid `x_j = j L / n`, `j = 0..n`.
pub fn grid(n: usize, length: f64) -> Vec<f64> {
    let dx = length / n as f64;
    (0..n).map(|j| j as f64 * dx).collect()
}

/// Planned forward/inverse transforms of a fixed length. Not shared mutably:
/// each task owns its own scratch.
#[derive(Clone)]
pub struct Transform {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    n: usize,
}

impl Transform {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); len],
            n,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.forward.process_with_scratch(data, &mut self.scratch);
    }

    /// Inverse transform including the `1/n` normalization.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.inverse.process_with_scratch(data, &mut self.scratch);
        let scale = 1.0 / self.n as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }
}

/// Spectral derivative of order `order` of periodic samples over `length`.
/// The Nyquist mode is dropped for odd orders.
pub fn derivative(values: &[Complex64], length: f64, order: u32) -> Vec<Complex64> {
    let n = values.len();
    let mut t = Transform::new(n);
    let mut data = values.to_vec();
    t.forward(&mut data);
    let ks = wavenumbers(n, length);
    for (j, (v, k)) in data.iter_mut().zip(&ks).enumerate() {
        if order % 2 == 1 && n % 2 == 0 && j == n / 2 {
            *v = Complex64::new(0.0, 0.0);
            continue;
        }
        *v *= Complex64::new(0.0, *k).powu(order);
    }
    t.inverse(&mut data);
    data
}

/// Band-limited interpolation of periodic samples at arbitrary points.
pub fn interpolate(values: &[Complex64], length: f64, points: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    let mut t = Transform::new(n);
    let mut coeffs = values.to_vec();
    t.forward(&mut coeffs);
    let ks = wavenumbers(n, length);
    points
        .iter()
        .map(|&x| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, (c, k)) in coeffs.iter().zip(&ks).enumerate() {
                if n % 2 == 0 && j == n / 2 {
                    // Split the Nyquist mode symmetrically so real data stays real.
                    acc += c * (k * x).cos();
                } else {
                    acc += c * Complex64::from_polar(1.0, k * x);
                }
            }
            acc / n as f64
        })
        .collect()
}

/// Periodic shift `u(x + s)` of samples over `length` via the Fourier shift theorem.
pub fn shift(values: &[Complex64], length: f64, s: f64, transform: &mut Transform) -> Vec<Complex64> {
    let n = values.len();
    let mut data = values.to_vec();
    transform.forward(&mut data);
    let ks = wavenumbers(n, length);
    for (j, (v, k)) in data.iter_mut().zip(&ks).enumerate() {
        if n % 2 == 0 && j == n / 2 {
            *v *= (k * s).cos();
        } else {
            *v *= Complex64::from_polar(1.0, k * s);
        }
    }
    transform.inverse(&mut data);
    data
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_derivative_of_trig_modes() {
        let n = 64;
        let l = 2.0 * PI;
        let xs = grid(n, l);
        let f: Vec<Complex64> = xs
            .iter()
            .map(|&x| Complex64::new((3.0 * x).cos(), (2.0 * x).sin()))
            .collect();
        let d2 = derivative(&f, l, 2);
        for (x, d) in xs.iter().zip(&d2) {
            assert!((d.re + 9.0 * (3.0 * x).cos()).abs() < 1e-11);
            assert!((d.im + 4.0 * (2.0 * x).sin()).abs() < 1e-11);
        }
    }

    #[test]
    fn shift_and_interpolate_agree_with_closed_form() {
        let n = 128;
        let l = 4.0 * PI;
        let xs = grid(n, l);
        let f: Vec<Complex64> = xs.iter().map(|&x| Complex64::new((x / 2.0).sin(), (1.5 * x).cos())).collect();
        let mut t = Transform::new(n);
        let s = 0.377;
        let shifted = shift(&f, l, s, &mut t);
        for (x, v) in xs.iter().zip(&shifted) {
            assert!((v.re - ((x + s) / 2.0).sin()).abs() < 1e-12);
            assert!((v.im - (1.5 * (x + s)).cos()).abs() < 1e-12);
        }
        let pts = [0.1, 2.2, 9.7, -1.0];
        let vals = interpolate(&f, l, &pts);
        for (x, v) in pts.iter().zip(&vals) {
            assert!((v.re - (x / 2.0).sin()).abs() < 1e-12);
        }
    }
}
