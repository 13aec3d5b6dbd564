//! Hill-equation companion of the translation mode and the Floquet constant θ.

use crate::error::{Error, Result};
use crate::ode::dopri5;
use crate::wave::WaveParams;

/// `|θ|` below which the kernel classification is refused.
pub const THETA_DEGENERACY: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct HillSolution {
    pub params: WaveParams,
    /// `q(L)`
    pub q_final: f64,
    /// `q'(L)`
    pub q_prime_final: f64,
    /// `p'(0) = 2K/L`
    pub p_prime_0: f64,
    pub theta: f64,
    /// Largest deviation of `q p' − q' p` from its initial value along the accepted mesh.
    pub wronskian_drift: f64,
    pub wronskian: f64,
}

/// Inertial index `(n₋, n₀)` of the linearized operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InertialIndex {
    pub n_minus: usize,
    pub n_zero: usize,
}

/// `S = sn cn dn / (1 + β² sn²)²` at `y = αξ`; proportional to `ψ'`.
pub fn p_eigenfunction(p: &WaveParams, xi: f64) -> f64 {
    let (sn, cn, dn) = p.jacobi(xi);
    let b = 1.0 + p.beta_sq * sn * sn;
    sn * cn * dn / (b * b)
}

/// Derivative of [`p_eigenfunction`] in `ξ`.
pub fn p_eigenfunction_prime(p: &WaveParams, xi: f64) -> f64 {
    let (sn, cn, dn) = p.jacobi(xi);
    let k2 = p.kappa_sq();
    let b = 1.0 + p.beta_sq * sn * sn;
    let triple = cn * cn * dn * dn - sn * sn * dn * dn - k2 * sn * sn * cn * cn;
    p.alpha * (triple / (b * b) - 4.0 * p.beta_sq * (sn * cn * dn).powi(2) / b.powi(3))
}

/// Potential `c − 3ψ²/(2c)` of the Hill operator `L₊ = −∂² + Q`.
pub fn lplus_potential(p: &WaveParams, xi: f64) -> f64 {
    let psi = p.psi(xi);
    p.c - 1.5 * psi * psi / p.c
}

/// Solves `−q'' + Q q = 0`, `q(0) = 1/p'(0)`, `q'(0) = 0` on `[0, L]` and returns
/// `(q(L), q'(L), Wronskian drift)` where the drift uses the supplied kernel `(p, p')`.
pub fn floquet_companion<Q, P>(
    potential: Q,
    kernel: P,
    period: f64,
    p_prime_0: f64,
    tol: f64,
) -> Result<(f64, f64, f64, f64)>
where
    Q: Fn(f64) -> f64,
    P: Fn(f64) -> (f64, f64),
{
    let traj = dopri5(
        |x, y: &[f64; 2]| [y[1], potential(x) * y[0]],
        0.0,
        [1.0 / p_prime_0, 0.0],
        period,
        tol,
        tol,
    )?;
    let wronskian = |x: f64, y: &[f64; 2]| {
        let (pv, dp) = kernel(x);
        y[0] * dp - y[1] * pv
    };
    let w0 = wronskian(0.0, &traj.y[0]);
    let drift = traj
        .t
        .iter()
        .zip(&traj.y)
        .fold(0.0_f64, |m, (&x, y)| m.max((wronskian(x, y) - w0).abs()));
    let [q, dq] = traj.last();
    Ok((q, dq, drift, w0))
}

/// Integrates the Hill IVP for the wave `p` and forms `θ = q'(L)/p'(0)`.
pub fn integrate_hill_ivp(p: &WaveParams, tol: f64) -> Result<HillSolution> {
    if !(1e-14..=1e-6).contains(&tol) {
        return Err(Error::Domain(format!("tolerance must lie in [1e-14, 1e-6], got {tol}")));
    }
    let p_prime_0 = p.alpha;
    let (q_final, q_prime_final, wronskian_drift, wronskian) = floquet_companion(
        |x| lplus_potential(p, x),
        |x| (p_eigenfunction(p, x), p_eigenfunction_prime(p, x)),
        p.period,
        p_prime_0,
        tol,
    )?;
    Ok(HillSolution {
        params: p.clone(),
        q_final,
        q_prime_final,
        p_prime_0,
        theta: q_prime_final / p_prime_0,
        wronskian_drift,
        wronskian,
    })
}

/// Classifies the zero eigenvalue from the sign of θ, for a kernel with two
/// zeros per period and the normalization `q(0) = 1/p'(0)`, `q p' − q' p = 1`.
///
/// `θ > 0` places zero at the second periodic eigenvalue, one negative below it;
/// `θ < 0` places it at the third, with two negative eigenvalues.
pub fn inertial_index_from_theta(h: &HillSolution) -> Result<InertialIndex> {
    classify_theta(h.theta)
}

pub fn classify_theta(theta: f64) -> Result<InertialIndex> {
    if !theta.is_finite() || theta.abs() <= THETA_DEGENERACY {
        return Err(Error::DegenerateTheta(theta));
    }
    let n_minus = if theta > 0.0 { 1 } else { 2 };
    Ok(InertialIndex { n_minus, n_zero: 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wave::params_from_kappa;

    #[test]
    fn kernel_function_zeros() {
        let p = params_from_kappa(2.0, 0.4).unwrap();
        assert_eq!(p_eigenfunction(&p, 0.0), 0.0);
        assert!(p_eigenfunction(&p, 1.0).abs() < 1e-13);
        assert!((p_eigenfunction_prime(&p, 0.0) - p.alpha).abs() < 1e-14);
    }

    #[test]
    fn kernel_function_is_scaled_psi_prime() {
        let p = params_from_kappa(3.0, 0.7).unwrap();
        let scale = -2.0 * p.alpha * p.eta4 * (p.kappa_sq() + p.beta_sq);
        for i in 0..30 {
            let x = 0.1 * i as f64;
            assert!((p.psi_prime(x) - scale * p_eigenfunction(&p, x)).abs() < 1e-12 * scale.abs());
        }
    }

    #[test]
    fn kernel_derivative_matches_difference_quotient() {
        let p = params_from_kappa(2.0, 0.9).unwrap();
        for i in 0..20 {
            let x = 0.1 * i as f64 + 0.01;
            let h = 1e-6;
            let fd = (p_eigenfunction(&p, x + h) - p_eigenfunction(&p, x - h)) / (2.0 * h);
            assert!((p_eigenfunction_prime(&p, x) - fd).abs() < 1e-7);
        }
    }

    #[test]
    fn kernel_solves_hill_equation() {
        // spectral residual of L₊ p
        let p = params_from_kappa(2.0, 0.5).unwrap();
        let n = 512;
        let grid = crate::wave::GridFunction::from_fn(p.period, n, |x| p_eigenfunction(&p, x)).unwrap();
        let d2 = grid.derivative(2);
        let res = (0..n).fold(0.0_f64, |m, j| {
            let x = grid.x(j);
            m.max((-d2.samples()[j] + lplus_potential(&p, x) * grid.samples()[j]).abs())
        });
        assert!(res < 1e-8, "residual {res}");
    }

    #[test]
    fn first_table_row() {
        let p = params_from_kappa(2.0, 0.1).unwrap();
        let h = integrate_hill_ivp(&p, 1e-12).unwrap();
        assert!((h.p_prime_0 - 1.57475).abs() / 1.57475 < 5e-6);
        assert!((h.q_prime_final - 0.00205921).abs() / 0.00205921 < 5e-4);
        assert!((h.theta - 0.00130764).abs() / 0.00130764 < 5e-4);
        assert!((h.wronskian - 1.0).abs() < 1e-14);
        assert!(h.wronskian_drift < 1e-8);
    }

    #[test]
    fn theta_tolerance_independence() {
        for (l, k) in [(2.0, 0.3), (4.0, 0.5), (10.0, 0.2)] {
            let p = params_from_kappa(l, k).unwrap();
            let a = integrate_hill_ivp(&p, 1e-10).unwrap().theta;
            let b = integrate_hill_ivp(&p, 1e-12).unwrap().theta;
            assert!((a - b).abs() < 5e-7 * b.abs(), "L={l} κ={k}: {a} vs {b}");
        }
    }

    #[test]
    fn theta_classification() {
        assert_eq!(classify_theta(-1.0).unwrap(), InertialIndex { n_minus: 2, n_zero: 1 });
        assert_eq!(classify_theta(0.00130764).unwrap(), InertialIndex { n_minus: 1, n_zero: 1 });
        assert!(matches!(classify_theta(1e-12), Err(Error::DegenerateTheta(_))));
    }

    #[test]
    fn isoinertial_along_sweep() {
        for l in [1.0, 2.0, 4.0] {
            let first = classify_theta(integrate_hill_ivp(&params_from_kappa(l, 0.05).unwrap(), 1e-11).unwrap().theta)
                .unwrap();
            for i in 2..=19 {
                let p = params_from_kappa(l, 0.05 * i as f64).unwrap();
                let idx = inertial_index_from_theta(&integrate_hill_ivp(&p, 1e-11).unwrap()).unwrap();
                assert_eq!(idx, first);
            }
        }
    }

    #[test]
    fn bad_tolerance() {
        let p = params_from_kappa(2.0, 0.3).unwrap();
        assert!(integrate_hill_ivp(&p, 1e-3).is_err());
    }
}
