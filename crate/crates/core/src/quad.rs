//! Gauss–Legendre rules and composite quadrature with panel doubling.

use crate::error::{Error, Result};
use std::sync::OnceLock;

/// Order of the per-panel rule used by [`integrate`].
pub const PANEL_ORDER: usize = 16;
const MAX_PANELS: usize = 1 << 16;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Cached panel rule of order [`PANEL_ORDER`].
pub fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_ORDER))
}

/// Composite Gauss rule with a fixed number of equal panels; returns `(∫f, ∫|f|)`.
pub fn composite<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> (f64, f64) {
    let (nodes, weights) = panel_rule();
    let width = (b - a) / panels as f64;
    let half = 0.5 * width;
    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    for j in 0..panels {
        let mid = a + (j as f64 + 0.5) * width;
        for (x, w) in nodes.iter().zip(weights) {
            let v = f(mid + half * x);
            sum += w * v;
            abs_sum += w * v.abs();
        }
    }
    (sum * half, abs_sum * half)
}

/// Integrates `f` over `[a, b]`, doubling the panel count until two successive
/// values agree to `tol` relative to `∫|f|`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let mut panels = 4;
    let (mut prev, _) = composite(f, a, b, panels);
    while panels < MAX_PANELS {
        panels *= 2;
        let (value, scale) = composite(f, a, b, panels);
        if !value.is_finite() {
            return Err(Error::NumericalFailure("non-finite integrand".into()));
        }
        if (value - prev).abs() <= tol * scale.max(f64::MIN_POSITIVE) {
            return Ok(value);
        }
        prev = value;
    }
    Err(Error::NumericalFailure(format!(
        "quadrature did not reach tolerance {tol:e} with {MAX_PANELS} panels"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 16, 40] {
            let (_, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let n = 8;
        let (x, w) = gauss_legendre(n);
        for deg in 0..2 * n {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "degree {deg}");
        }
    }

    #[test]
    fn three_point_rule_nodes() {
        let (x, w) = gauss_legendre(3);
        assert!((x[2] - (0.6f64).sqrt()).abs() < 1e-15);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn integrate_peaked_function() {
        let value = integrate(&|x: f64| 1.0 / (1e-2 + x * x), -1.0, 1.0, 1e-12).unwrap();
        let exact = 2.0 * (1.0f64 / 0.1).atan() / 0.1;
        assert!((value - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn integrate_with_cancellation() {
        let value = integrate(&|x: f64| (2.0 * x).cos(), 0.0, std::f64::consts::FRAC_PI_2, 1e-12).unwrap();
        assert!(value.abs() < 1e-13);
    }
}
