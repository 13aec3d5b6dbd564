//! Complete elliptic integrals and Jacobi elliptic functions.
//!
//! The argument is always the modulus `k` (not the parameter `m = k²`).

use crate::error::{Error, Result};
use std::f64::consts::FRAC_PI_2;

/// Largest modulus accepted; closer to 1 the wave family degenerates.
pub const KAPPA_MAX: f64 = 1.0 - 1e-9;

const AGM_MAX_ITER: usize = 64;

/// Elliptic modulus `k` with `0 ≤ k ≤ 1 − 1e−9`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Modulus(f64);

impl Modulus {
    pub fn new(kappa: f64) -> Result<Self> {
        if !kappa.is_finite() || kappa < 0.0 {
            return Err(Error::Domain(format!("modulus must be finite and nonnegative, got {kappa}")));
        }
        if kappa >= 1.0 {
            return Err(Error::Domain(format!("modulus must be below 1, got {kappa}")));
        }
        if kappa > KAPPA_MAX {
            return Err(Error::Domain(format!(
                "modulus {kappa} is within 1e-9 of the separatrix limit"
            )));
        }
        Ok(Self(kappa))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Complementary modulus `√(1 − k²)`, computed without cancellation.
    pub fn complement(self) -> f64 {
        ((1.0 - self.0) * (1.0 + self.0)).sqrt()
    }
}

/// Runs the AGM of `(1, k')` and returns `(a_n, Σ 2^{n-1} c_n²)`.
fn agm(kappa: f64) -> (f64, f64) {
    let mut a = 1.0_f64;
    let mut b = ((1.0 - kappa) * (1.0 + kappa)).sqrt();
    let mut c = kappa;
    let mut weight = 0.5;
    let mut sum = weight * c * c;
    for _ in 0..AGM_MAX_ITER {
        if c.abs() <= f64::EPSILON * a {
            break;
        }
        let a_next = 0.5 * (a + b);
        c = 0.5 * (a - b);
        b = (a * b).sqrt();
        a = a_next;
        weight *= 2.0;
        sum += weight * c * c;
    }
    (a, sum)
}

/// Complete elliptic integral of the first kind `K(k)`.
pub fn complete_elliptic_k(kappa: Modulus) -> f64 {
    let (a, _) = agm(kappa.0);
    FRAC_PI_2 / a
}

/// Complete elliptic integral of the second kind `E(k)`.
pub fn complete_elliptic_e(kappa: Modulus) -> f64 {
    let (a, sum) = agm(kappa.0);
    FRAC_PI_2 / a * (1.0 - sum)
}

/// `dK/dk = (E − k'²K) / (k k'²)`, with the `k → 0` limit `πk/4`.
pub fn complete_elliptic_k_derivative(kappa: Modulus) -> f64 {
    let k = kappa.0;
    if k < 1e-6 {
        return std::f64::consts::FRAC_PI_4 * k;
    }
    let kp2 = (1.0 - k) * (1.0 + k);
    (complete_elliptic_e(kappa) - kp2 * complete_elliptic_k(kappa)) / (k * kp2)
}

/// Checked wrapper over [`complete_elliptic_k`] taking a raw modulus.
pub fn complete_elliptic_k_checked(kappa: f64) -> Result<f64> {
    Modulus::new(kappa).map(complete_elliptic_k)
}

/// Jacobi elliptic functions `(sn, cn, dn)(u, k)` by descending Landen (AGM) iteration.
pub fn jacobi_sn_cn_dn(u: f64, kappa: Modulus) -> (f64, f64, f64) {
    let k = kappa.0;
    if k == 0.0 {
        let (s, c) = u.sin_cos();
        return (s, c, 1.0);
    }
    let quarter = complete_elliptic_k(kappa);
    let period = 4.0 * quarter;
    // reduce into [-2K, 2K)
    let u = u - period * ((u + 2.0 * quarter) / period).floor();

    let mut a = [0.0_f64; AGM_MAX_ITER + 1];
    let mut c = [0.0_f64; AGM_MAX_ITER + 1];
    a[0] = 1.0;
    c[0] = k;
    let mut b = kappa.complement();
    let mut n = 0;
    while n < AGM_MAX_ITER && c[n].abs() > f64::EPSILON * a[n] {
        a[n + 1] = 0.5 * (a[n] + b);
        c[n + 1] = 0.5 * (a[n] - b);
        b = (a[n] * b).sqrt();
        n += 1;
    }
    let mut amp = (n as f64).exp2() * a[n] * u;
    let mut amp_prev = amp;
    for j in (1..=n).rev() {
        amp_prev = amp;
        amp = 0.5 * (amp + (c[j] / a[j] * amp.sin()).asin());
    }
    let (sn, cn) = amp.sin_cos();
    let denom = (amp_prev - amp).cos();
    let dn = if n > 0 && cn.abs() > 1e-3 && denom.abs() > 1e-3 {
        cn / denom
    } else {
        ((1.0 - k * sn) * (1.0 + k * sn)).sqrt()
    };
    (sn, cn, dn)
}
