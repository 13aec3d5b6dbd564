//! Spectral differentiation and transforms on uniform periodic grids.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Signed integer wavenumber of FFT slot `j` on an `n`-point grid.
pub fn mode_index(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Angular wavenumbers `2πk/L` in FFT order.
pub fn wavenumbers(n: usize, period: f64) -> Vec<f64> {
    (0..n).map(|j| 2.0 * PI / period * mode_index(j, n) as f64).collect()
}

/// Unnormalized forward FFT of real samples.
pub fn forward(samples: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Inverse FFT including the `1/n` factor; returns the real part.
pub fn inverse_real(coeffs: &[Complex64]) -> Vec<f64> {
    let mut buf = coeffs.to_vec();
    let n = buf.len();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|z| z.re / n as f64).collect()
}

/// `order`-th spectral derivative of a real periodic sample vector.
/// The Nyquist mode is dropped for odd orders so the result stays real.
pub fn derivative(samples: &[f64], period: f64, order: u32) -> Vec<f64> {
    let n = samples.len();
    let k = wavenumbers(n, period);
    let mut hat = forward(samples);
    let factor = Complex64::new(0.0, 1.0);
    for (j, z) in hat.iter_mut().enumerate() {
        if order % 2 == 1 && n % 2 == 0 && j == n / 2 {
            *z = Complex64::new(0.0, 0.0);
            continue;
        }
        *z *= (factor * k[j]).powu(order);
    }
    inverse_real(&hat)
}

/// Evaluates the trigonometric interpolant of even samples, `Σ a_k cos(2πk x/L)`,
/// at arbitrary points.
pub struct CosineSeries {
    coeffs: Vec<f64>,
    omega: f64,
}

impl CosineSeries {
    pub fn from_samples(samples: &[f64], period: f64) -> Self {
        let n = samples.len();
        let hat = forward(samples);
        let half = n / 2;
        let mut coeffs = Vec::with_capacity(half + 1);
        coeffs.push(hat[0].re / n as f64);
        for z in hat.iter().take(half).skip(1) {
            coeffs.push(2.0 * z.re / n as f64);
        }
        if n % 2 == 0 {
            coeffs.push(hat[half].re / n as f64);
        }
        Self { coeffs, omega: 2.0 * PI / period }
    }

    pub fn eval(&self, x: f64) -> f64 {
        // Clenshaw recurrence for a cosine series
        let t = (self.omega * x).cos();
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for &a in self.coeffs.iter().skip(1).rev() {
            let b0 = a + 2.0 * t * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs[0] + b1 * t - b2
    }
}
