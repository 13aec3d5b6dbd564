//! Adaptive Dormand–Prince 5(4) integrator for small fixed-size systems.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const MAX_STEPS: usize = 5_000_000;

/// Result of an integration, with the accepted mesh when requested.
#[derive(Debug, Clone)]
pub struct Trajectory<const D: usize> {
    pub t: Vec<f64>,
    pub y: Vec<[f64; D]>,
    pub accepted: usize,
    pub rejected: usize,
}

impl<const D: usize> Trajectory<D> {
    pub fn last(&self) -> [f64; D] {
        *self.y.last().expect("trajectory has at least the initial point")
    }
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` with mixed tolerance
/// `atol + rtol·|y|`, recording every accepted step.
pub fn dopri5<const D: usize, F>(
    f: F,
    t0: f64,
    y0: [f64; D],
    t1: f64,
    rtol: f64,
    atol: f64,
) -> Result<Trajectory<D>>
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    let span = t1 - t0;
    if !(span.is_finite() && span > 0.0) {
        return Err(Error::Domain(format!("integration interval [{t0}, {t1}] is empty")));
    }
    let mut traj = Trajectory { t: vec![t0], y: vec![y0], accepted: 0, rejected: 0 };
    let mut t = t0;
    let mut y = y0;
    let mut k = [[0.0; D]; 7];
    k[0] = f(t, &y);
    let mut h = initial_step(&f, t, &y, &k[0], rtol, atol).min(span);

    for _ in 0..MAX_STEPS {
        if t >= t1 {
            return Ok(traj);
        }
        if t + h > t1 {
            h = t1 - t;
        }
        if h <= 16.0 * f64::EPSILON * t.abs().max(span) {
            return Err(Error::IntegrationFailure { t, reason: "step size underflow".into() });
        }
        for s in 1..7 {
            let mut stage = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    for d in 0..D {
                        stage[d] += h * a * kj[d];
                    }
                }
            }
            k[s] = f(t + C[s] * h, &stage);
        }
        // stage 7 is evaluated at the fifth-order solution
        let mut y_new = y;
        for (s, ks) in k.iter().enumerate().take(6) {
            for d in 0..D {
                y_new[d] += h * A[6][s] * ks[d];
            }
        }
        k[6] = f(t + h, &y_new);
        let mut err = 0.0;
        for d in 0..D {
            let est: f64 = (0..7).map(|s| E[s] * k[s][d]).sum::<f64>() * h;
            let scale = atol + rtol * y[d].abs().max(y_new[d].abs());
            err += (est / scale).powi(2);
        }
        let err = (err / D as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::IntegrationFailure { t, reason: "non-finite error estimate".into() });
        }
        if err <= 1.0 {
            t += h;
            y = y_new;
            k[0] = k[6];
            traj.t.push(t);
            traj.y.push(y);
            traj.accepted += 1;
        } else {
            traj.rejected += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= if err > 1.0 { factor.min(1.0) } else { factor };
    }
    Err(Error::IntegrationFailure { t, reason: format!("exceeded {MAX_STEPS} steps") })
}

fn initial_step<const D: usize, F>(f: &F, t: f64, y: &[f64; D], dy: &[f64; D], rtol: f64, atol: f64) -> f64
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    let norm = |v: &[f64; D]| {
        (v.iter().zip(y).map(|(a, b)| (a / (atol + rtol * b.abs())).powi(2)).sum::<f64>() / D as f64).sqrt()
    };
    let d0 = norm(y);
    let d1 = norm(dy);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let mut y1 = *y;
    for d in 0..D {
        y1[d] += h0 * dy[d];
    }
    let dy1 = f(t + h0, &y1);
    let mut diff = [0.0; D];
    for d in 0..D {
        diff[d] = dy1[d] - dy[d];
    }
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let traj = dopri5(|_, y: &[f64; 2]| [y[1], -y[0]], 0.0, [1.0, 0.0], 10.0, 1e-12, 1e-12).unwrap();
        let [x, v] = traj.last();
        assert!((x - 10f64.cos()).abs() < 1e-10);
        assert!((v + 10f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn fifth_order_convergence() {
        // y' = y on [0, 1]; error should fall like tol
        let coarse = dopri5(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], 1.0, 1e-6, 1e-6).unwrap();
        let fine = dopri5(|_, y: &[f64; 1]| [y[0]], 0.0, [1.0], 1.0, 1e-10, 1e-10).unwrap();
        let e = std::f64::consts::E;
        assert!((fine.last()[0] - e).abs() < 1e-9);
        assert!(fine.accepted > coarse.accepted);
    }

    #[test]
    fn empty_interval_rejected() {
        assert!(dopri5(|_, y: &[f64; 1]| [y[0]], 1.0, [1.0], 1.0, 1e-8, 1e-8).is_err());
    }
}
