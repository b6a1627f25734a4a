//! FFT helpers for smooth 1-periodic data sampled on a uniform grid `x_i = i / n`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Uniform grid `i / n` on `[0, 1)`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / n as f64).collect()
}

/// Periodic trapezoid mean, i.e. `∫_0^1 f` for periodic `f`.
pub fn mean(values: &[f64]) -> f64 {
    crate::estimators::KahanSum::sum(values.iter().copied()) / values.len() as f64
}

fn signed_frequency(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Applies a multiplier to every Fourier mode; the Nyquist mode of even grids is dropped.
fn apply_multiplier(values: &[f64], multiplier: impl Fn(f64) -> Complex64) -> Vec<f64> {
    let n = values.len();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    forward.process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        if n % 2 == 0 && k == n / 2 {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c *= multiplier(signed_frequency(k, n));
        }
    }
    inverse.process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|c| c.re * scale).collect()
}

/// Spectral derivative of periodic grid data.
pub fn derivative(values: &[f64]) -> Vec<f64> {
    apply_multiplier(values, |k| Complex64::new(0.0, 2.0 * PI * k))
}

/// Cumulative integral `x ↦ ∫_0^x f` on the grid, for periodic `f`.
///
/// The zero mode contributes `mean(f) · x`; the oscillating part is integrated
/// mode by mode, so the result is spectrally accurate.
pub fn cumulative_integral(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let m = mean(values);
    let centered: Vec<f64> = values.iter().map(|v| v - m).collect();
    let antiderivative = apply_multiplier(&centered, |k| {
        if k == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, -1.0 / (2.0 * PI * k))
        }
    });
    let offset = antiderivative[0];
    antiderivative
        .iter()
        .enumerate()
        .map(|(i, p)| m * (i as f64 / n as f64) + p - offset)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_fourier_mode() {
        let x = uniform_grid(64);
        let f: Vec<f64> = x.iter().map(|x| (2.0 * PI * 3.0 * x).sin()).collect();
        let df = derivative(&f);
        for (xi, d) in x.iter().zip(&df) {
            let exact = 6.0 * PI * (6.0 * PI * xi).cos();
            assert!((d - exact).abs() < 1e-11);
        }
    }

    #[test]
    fn cumulative_integral_with_mean() {
        let x = uniform_grid(128);
        let f: Vec<f64> = x.iter().map(|x| 0.5 + (2.0 * PI * x).cos()).collect();
        let c = cumulative_integral(&f);
        for (xi, ci) in x.iter().zip(&c) {
            let exact = 0.5 * xi + (2.0 * PI * xi).sin() / (2.0 * PI);
            assert!((ci - exact).abs() < 1e-13, "{ci} vs {exact}");
        }
    }

    #[test]
    fn cumulative_integral_of_smooth_non_polynomial() {
        // ∫_0^x e^{cos 2πs} ds checked against a fine trapezoid rule
        let n = 256;
        let x = uniform_grid(n);
        let f: Vec<f64> = x.iter().map(|x| (2.0 * PI * x).cos().exp()).collect();
        let c = cumulative_integral(&f);
        let probe = 77;
        let m = 200_000;
        let h = x[probe] / m as f64;
        let mut reference = 0.0;
        for j in 0..=m {
            let w = if j == 0 || j == m { 0.5 } else { 1.0 };
            reference += w * (2.0 * PI * j as f64 * h).cos().exp();
        }
        reference *= h;
        assert!((c[probe] - reference).abs() < 1e-9);
    }
}
