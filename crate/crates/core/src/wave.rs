//! Explicit L-periodic traveling waves `u = ψ(x − ct)`, `v = φ(x − ct)` with `φ = ψ²/(2c)`.

use crate::elliptic::{
    complete_elliptic_k, complete_elliptic_k_derivative, jacobi_sn_cn_dn, Modulus,
};
use crate::error::{Error, Result};
use crate::fourier;
use std::f64::consts::PI;

/// Full parametrization of one traveling wave.
///
/// Fields are public for inspection; construct through [`params_from_kappa`]
/// or [`params_from_speed`] so the invariants hold.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveParams {
    pub period: f64,
    pub kappa: Modulus,
    pub c: f64,
    /// `4√(1 − κ² + κ⁴)`
    pub h: f64,
    pub eta1: f64,
    pub eta3: f64,
    pub eta4: f64,
    pub beta_sq: f64,
    pub f1: f64,
    pub a: f64,
    /// `2K(κ)/L`
    pub alpha: f64,
    pub big_k: f64,
    /// Newton-equation energy, fixed to zero.
    pub e_const: f64,
    /// Second integration constant, fixed to zero.
    pub d1_const: f64,
}

/// Checks that failed in [`WaveParams::check_invariants`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantReport {
    pub root_sum: f64,
    pub ordering_ok: bool,
    pub period_identity: f64,
    pub beta_identity: f64,
    pub f1_identity: f64,
    pub four_real_roots: bool,
}

impl InvariantReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.ordering_ok
            && self.four_real_roots
            && self.root_sum <= tol
            && self.period_identity <= tol
            && self.beta_identity <= tol
            && self.f1_identity <= tol
    }
}

fn speed_of(kappa: Modulus, period: f64) -> f64 {
    let k = kappa.value();
    let big_k = complete_elliptic_k(kappa);
    let h = 4.0 * (1.0 - k * k + k.powi(4)).sqrt();
    4.0 * big_k * big_k * h / (period * period)
}

fn speed_derivative(kappa: Modulus, period: f64) -> f64 {
    let k = kappa.value();
    let big_k = complete_elliptic_k(kappa);
    let g = 1.0 - k * k + k.powi(4);
    let h = 4.0 * g.sqrt();
    let dh = 2.0 * (4.0 * k.powi(3) - 2.0 * k) / g.sqrt();
    4.0 / (period * period) * (2.0 * big_k * complete_elliptic_k_derivative(kappa) * h + big_k * big_k * dh)
}

/// Builds the wave of period `period` and modulus `kappa`.
pub fn params_from_kappa(period: f64, kappa: f64) -> Result<WaveParams> {
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::Domain(format!("period must be positive, got {period}")));
    }
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::Domain(format!("modulus must lie in (0, 1), got {kappa}")));
    }
    let modulus = Modulus::new(kappa)?;
    let k2 = kappa * kappa;
    let big_k = complete_elliptic_k(modulus);
    let h = 4.0 * (1.0 - k2 + k2 * k2).sqrt();
    let c = 4.0 * big_k * big_k * h / (period * period);
    let shift = 2.0 * (2.0 * k2 - 1.0);
    let eta4 = 8.0 * 2f64.sqrt() * big_k * big_k / (3f64.sqrt() * period * period)
        * (h * (h + shift)).sqrt();
    let s = (16.0 * c * c - 3.0 * eta4 * eta4).sqrt();
    let eta1 = -(s + eta4) / 2.0;
    let eta3 = (s - eta4) / 2.0;
    let root_plus = (h + shift).sqrt();
    let beta_sq = 2.0 * k2 * root_plus / (root_plus + 3f64.sqrt() * (h - shift).sqrt());
    let f1 = -eta4 * (4.0 * c * c - eta4 * eta4) / (8.0 * c);
    let a = 2.0 / (eta4 * (eta3 - eta1)).sqrt();
    Ok(WaveParams {
        period,
        kappa: modulus,
        c,
        h,
        eta1,
        eta3,
        eta4,
        beta_sq,
        f1,
        a,
        alpha: 2.0 * big_k / period,
        big_k,
        e_const: 0.0,
        d1_const: 0.0,
    })
}

/// Smallest speed admitting an L-periodic wave: `4π²/L²`.
pub fn speed_threshold(period: f64) -> f64 {
    4.0 * PI * PI / (period * period)
}

/// Inverts the increasing map `κ ↦ c(κ)` at fixed period.
pub fn kappa_from_c(period: f64, c: f64) -> Result<Modulus> {
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::Domain(format!("period must be positive, got {period}")));
    }
    let threshold = speed_threshold(period);
    if !c.is_finite() || c <= threshold {
        return Err(Error::BelowThreshold { c, threshold });
    }
    let (mut lo, mut hi) = (1e-6, 1.0 - 1e-6);
    let m = |k: f64| Modulus::new(k).expect("bracket lies inside the modulus domain");
    if c <= speed_of(m(lo), period) {
        return Err(Error::Domain(format!(
            "speed {c} is too close to the threshold {threshold} to resolve the modulus"
        )));
    }
    if c >= speed_of(m(hi), period) {
        return Err(Error::Domain(format!("speed {c} requires a modulus beyond 1 - 1e-6")));
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if speed_of(m(mid), period) < c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut k = 0.5 * (lo + hi);
    for _ in 0..3 {
        let km = m(k);
        let slope = speed_derivative(km, period);
        if slope <= 0.0 {
            break;
        }
        let next = k - (speed_of(km, period) - c) / slope;
        if !(lo - 1e-12..=hi + 1e-12).contains(&next) {
            break;
        }
        k = next;
    }
    Modulus::new(k)
}

/// Builds the wave with period `period` and speed `c`.
pub fn params_from_speed(period: f64, c: f64) -> Result<WaveParams> {
    let kappa = kappa_from_c(period, c)?;
    params_from_kappa(period, kappa.value())
}

impl WaveParams {
    pub fn kappa_sq(&self) -> f64 {
        let k = self.kappa.value();
        k * k
    }

    /// `1 − κ²`
    pub fn kappa_prime_sq(&self) -> f64 {
        let k = self.kappa.value();
        (1.0 - k) * (1.0 + k)
    }

    pub fn jacobi(&self, xi: f64) -> (f64, f64, f64) {
        jacobi_sn_cn_dn(self.alpha * xi, self.kappa)
    }

    pub fn psi(&self, xi: f64) -> f64 {
        let (sn, _, dn) = self.jacobi(xi);
        self.eta4 * dn * dn / (1.0 + self.beta_sq * sn * sn)
    }

    pub fn phi(&self, xi: f64) -> f64 {
        let psi = self.psi(xi);
        psi * psi / (2.0 * self.c)
    }

    pub fn psi_prime(&self, xi: f64) -> f64 {
        let (sn, cn, dn) = self.jacobi(xi);
        let b = 1.0 + self.beta_sq * sn * sn;
        -2.0 * self.alpha * self.eta4 * (self.kappa_sq() + self.beta_sq) * sn * cn * dn / (b * b)
    }

    /// `ψ'' = cψ − ψ³/(2c) + F₁`.
    pub fn psi_second(&self, xi: f64) -> f64 {
        let psi = self.psi(xi);
        self.c * psi - psi.powi(3) / (2.0 * self.c) + self.f1
    }

    /// Newton potential with `½ψ'² + U(ψ) = 0` along the wave.
    pub fn potential(&self, psi: f64) -> f64 {
        psi * (psi.powi(3) - 4.0 * self.c * self.c * psi - 8.0 * self.c * self.f1) / (8.0 * self.c)
    }

    /// Modulus recovered from `(c, η₄)`.
    pub fn kappa_from_c_eta4(&self) -> f64 {
        let (c, e) = (self.c, self.eta4);
        let root = (16.0 * c * c * e * e - 3.0 * e.powi(4)).sqrt();
        ((root + 3.0 * e * e - 8.0 * c * c) / (2.0 * root)).sqrt()
    }

    pub fn check_invariants(&self) -> InvariantReport {
        let (c, e1, e3, e4) = (self.c, self.eta1, self.eta3, self.eta4);
        let scale = e4.abs().max(1.0);
        let bound = 2.0 * c / 3f64.sqrt();
        let period_identity = (8.0 * c.sqrt() * self.big_k
            / (16.0 * c * c * e4 * e4 - 3.0 * e4.powi(4)).powf(0.25)
            - self.period)
            .abs()
            / self.period;
        let f1_expected = -(e4 / (8.0 * c)) * (4.0 * c * c - e4 * e4);
        InvariantReport {
            root_sum: (e1 + e3 + e4).abs() / scale,
            ordering_ok: e1 < 0.0 && 0.0 < e3 && e3 < bound && bound < e4 && e4 < 2.0 * c,
            period_identity,
            beta_identity: (self.beta_sq + self.kappa_sq() * e4 / e1).abs() / self.beta_sq.max(1e-300),
            f1_identity: (self.f1 - f1_expected).abs() / f1_expected.abs().max(1e-300),
            four_real_roots: 27.0 * self.f1 * self.f1 - 4.0 * c.powi(4) < 0.0,
        }
    }

    /// Profile sampled on `n` uniform points of `[0, L)`.
    pub fn profile_grid(&self, n: usize) -> Result<(GridFunction, GridFunction)> {
        let psi = GridFunction::from_fn(self.period, n, |x| self.psi(x))?;
        let phi = GridFunction::from_fn(self.period, n, |x| self.phi(x))?;
        Ok((psi, phi))
    }
}

/// `(ψ(ξ), φ(ξ))`.
pub fn eval_profile(p: &WaveParams, xi: f64) -> (f64, f64) {
    let psi = p.psi(xi);
    (psi, psi * psi / (2.0 * p.c))
}

/// Real periodic function sampled at `x_j = jL/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    period: f64,
    samples: Vec<f64>,
}

impl GridFunction {
    pub fn new(period: f64, samples: Vec<f64>) -> Result<Self> {
        let n = samples.len();
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::Shape(format!("grid size must be a power of two ≥ 16, got {n}")));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Domain(format!("period must be positive, got {period}")));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("grid samples must be finite".into()));
        }
        Ok(Self { period, samples })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(period: f64, n: usize, f: F) -> Result<Self> {
        let samples = (0..n).map(|j| f(j as f64 * period / n as f64)).collect();
        Self::new(period, samples)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.samples.len() as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn derivative(&self, order: u32) -> GridFunction {
        Self {
            period: self.period,
            samples: fourier::derivative(&self.samples, self.period, order),
        }
    }

    /// Trapezoid rule over one period.
    pub fn integral(&self) -> f64 {
        self.spacing() * self.samples.iter().sum::<f64>()
    }

    /// `∫ f g` over one period.
    pub fn dot(&self, other: &GridFunction) -> f64 {
        self.spacing() * self.samples.iter().zip(&other.samples).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        Self { period: self.period, samples: self.samples.iter().map(|&v| f(v)).collect() }
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        self.samples.len() == other.samples.len() && self.period == other.period
    }

    /// Largest `|f(x_j) − f(−x_j)|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.samples.len();
        (1..n).fold(0.0, |m, j| m.max((self.samples[j] - self.samples[n - j]).abs()))
    }
}

/// `(ψ'' + ψ³/(2c) − cψ − F₁, ½ψ'² + U(ψ))` in sup norm, with spectral derivatives.
pub fn profile_residual(p: &WaveParams, n: usize) -> Result<(f64, f64)> {
    if n < 64 || !n.is_power_of_two() {
        return Err(Error::Shape(format!("residual grid must be a power of two ≥ 64, got {n}")));
    }
    let psi = GridFunction::from_fn(p.period, n, |x| p.psi(x))?;
    let d1 = psi.derivative(1);
    let d2 = psi.derivative(2);
    let mut r1: f64 = 0.0;
    let mut r2: f64 = 0.0;
    for j in 0..n {
        let s = psi.samples[j];
        r1 = r1.max((d2.samples[j] + s.powi(3) / (2.0 * p.c) - p.c * s - p.f1).abs());
        r2 = r2.max((0.5 * d1.samples[j].powi(2) + p.potential(s)).abs());
    }
    Ok((r1, r2))
}

/// The four conserved quantities of the system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conserved {
    pub mass_u: f64,
    pub mass_v: f64,
    /// `∫ (u_x² − u² v)`
    pub energy: f64,
    /// `∫ (u² + v²)`
    pub l2: f64,
}

impl Conserved {
    pub fn as_array(&self) -> [f64; 4] {
        [self.mass_u, self.mass_v, self.energy, self.l2]
    }
}

pub fn conserved_quantities(u: &GridFunction, v: &GridFunction) -> Result<Conserved> {
    if !u.same_grid(v) {
        return Err(Error::Shape(format!(
            "u has {} points over {}, v has {} over {}",
            u.len(),
            u.period,
            v.len(),
            v.period
        )));
    }
    let ux = u.derivative(1);
    let h = u.spacing();
    let mut energy = 0.0;
    let mut l2 = 0.0;
    for j in 0..u.len() {
        let (a, b) = (u.samples[j], v.samples[j]);
        energy += ux.samples[j].powi(2) - a * a * b;
        l2 += a * a + b * b;
    }
    Ok(Conserved { mass_u: u.integral(), mass_v: v.integral(), energy: h * energy, l2: h * l2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_oracle::adaptive_simpson;
    use proptest::prelude::*;

    // (L, κ, c) rows of the published θ table
    const SPEEDS: [(f64, f64, f64); 4] =
        [(2.0, 0.1, 9.87007), (4.0, 0.7, 2.95039), (3.0, 0.3, 4.40475), (10.0, 0.4, 0.400374)];

    #[test]
    fn published_speeds() {
        for (l, k, c) in SPEEDS {
            let p = params_from_kappa(l, k).unwrap();
            assert!((p.c - c).abs() / c < 5e-6, "L={l} κ={k}: {}", p.c);
        }
    }

    #[test]
    fn small_modulus_limit() {
        let l = 3.0;
        let p = params_from_kappa(l, 1e-5).unwrap();
        let c0 = speed_threshold(l);
        assert!((p.c - c0).abs() / c0 < 1e-9);
        assert!((p.eta4 - 2.0 * p.c / 3f64.sqrt()).abs() / p.eta4 < 1e-9);
        assert!(p.beta_sq < 1e-9);
    }

    #[test]
    fn invariants_on_sweep_grid() {
        for l in [1.0, 2.0, 4.0, 10.0] {
            for i in 1..=19 {
                let k = 0.05 * i as f64;
                let p = params_from_kappa(l, k).unwrap();
                let report = p.check_invariants();
                assert!(report.holds(1e-10), "L={l} κ={k}: {report:?}");
                assert!((p.kappa_from_c_eta4() - k).abs() < 1e-10);
                assert!((p.alpha - 1.0 / (2.0 * p.a * p.c.sqrt())).abs() < 1e-10 * p.alpha);
            }
        }
    }

    #[test]
    fn kappa_from_c_roundtrip() {
        for i in 1..=9 {
            let k = 0.1 * i as f64;
            let p = params_from_kappa(2.0, k).unwrap();
            let back = kappa_from_c(2.0, p.c).unwrap().value();
            assert!((back - k).abs() < 1e-10, "κ={k}: {back}");
        }
        let back = kappa_from_c(2.0, 9.87007).unwrap().value();
        assert!((back - 0.1).abs() < 1e-3);
    }

    #[test]
    fn threshold_rejected() {
        let l = 2.0;
        assert!(matches!(kappa_from_c(l, speed_threshold(l)), Err(Error::BelowThreshold { .. })));
        assert!(params_from_kappa(l, 0.0).is_err());
        assert!(params_from_kappa(l, 1.5).is_err());
    }

    #[test]
    fn profile_endpoints() {
        let p = params_from_kappa(2.0, 0.6).unwrap();
        assert!((p.psi(0.0) - p.eta4).abs() < 1e-14);
        let half = p.eta4 * p.kappa_prime_sq() / (1.0 + p.beta_sq);
        assert!((p.psi(1.0) - half).abs() < 1e-12);
        let (psi, phi) = eval_profile(&p, 0.37);
        assert_eq!(phi - psi * psi / (2.0 * p.c), 0.0);
    }

    #[test]
    fn psi_prime_matches_difference_quotient() {
        let p = params_from_kappa(2.0, 0.8).unwrap();
        for i in 0..20 {
            let x = 0.1 * i as f64 + 0.03;
            let h = 1e-6;
            let fd = (p.psi(x + h) - p.psi(x - h)) / (2.0 * h);
            assert!((p.psi_prime(x) - fd).abs() < 1e-6 * p.eta4);
        }
    }

    #[test]
    fn residual_small_for_exact_wave() {
        for k in [0.1, 0.5, 0.9] {
            let p = params_from_kappa(2.0, k).unwrap();
            let (r1, r2) = profile_residual(&p, 256).unwrap();
            let scale = p.c * p.eta4;
            assert!(r1 < 1e-8 * scale.max(1.0), "κ={k} r1={r1}");
            assert!(r2 < 1e-8 * scale.max(1.0) * p.eta4, "κ={k} r2={r2}");
        }
    }

    #[test]
    fn residual_detects_perturbed_amplitude() {
        let mut p = params_from_kappa(2.0, 0.3).unwrap();
        p.eta4 *= 1.01;
        let (r1, _) = profile_residual(&p, 256).unwrap();
        assert!(r1 > 1e-3 * p.c * p.eta4 / 10.0, "r1 = {r1}");
    }

    #[test]
    fn constant_wave_limit() {
        let c = 2.0_f64;
        let psi = 2.0 * c / 3f64.sqrt();
        let f1 = -2.0 * c * c / (3.0 * 3f64.sqrt());
        assert!((psi.powi(3) / (2.0 * c) - c * psi - f1).abs() < 1e-14);
    }

    #[test]
    fn conserved_for_simple_data() {
        let l = 5.0;
        let zero = GridFunction::from_fn(l, 64, |_| 0.0).unwrap();
        let q = conserved_quantities(&zero, &zero).unwrap();
        assert_eq!(q.as_array(), [0.0; 4]);
        let w = 2.0 * PI / l;
        let s = GridFunction::from_fn(l, 64, |x| (w * x).sin()).unwrap();
        let q = conserved_quantities(&s, &zero).unwrap();
        assert!((q.l2 - l / 2.0).abs() < 1e-13);
        assert!((q.energy - w * w * l / 2.0).abs() < 1e-12);
        let other = GridFunction::from_fn(l, 32, |_| 0.0).unwrap();
        assert!(matches!(conserved_quantities(&s, &other), Err(Error::Shape(_))));
    }

    #[test]
    fn conserved_for_wave_match_quadrature() {
        let p = params_from_kappa(2.0, 0.5).unwrap();
        let (psi, phi) = p.profile_grid(256).unwrap();
        let q = conserved_quantities(&psi, &phi).unwrap();
        let l = p.period;
        let tol = 1e-13;
        let m_u = adaptive_simpson(&|x| p.psi(x), 0.0, l, tol);
        let m_v = adaptive_simpson(&|x| p.phi(x), 0.0, l, tol);
        let e = adaptive_simpson(&|x| p.psi_prime(x).powi(2) - p.psi(x).powi(2) * p.phi(x), 0.0, l, tol);
        let l2 = adaptive_simpson(&|x| p.psi(x).powi(2) + p.phi(x).powi(2), 0.0, l, tol);
        for (got, want) in q.as_array().iter().zip([m_u, m_v, e, l2]) {
            assert!((got - want).abs() < 1e-10 * want.abs().max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn grid_validation() {
        assert!(GridFunction::new(1.0, vec![0.0; 15]).is_err());
        assert!(GridFunction::new(1.0, vec![0.0; 24]).is_err());
        assert!(GridFunction::new(1.0, vec![f64::NAN; 16]).is_err());
    }

    proptest! {
        #[test]
        fn profile_even_and_periodic(k in 0.05f64..0.95, x in -3.0f64..3.0, l in 0.5f64..10.0) {
            let p = params_from_kappa(l, k).unwrap();
            let v = p.psi(x);
            prop_assert!((v - p.psi(-x)).abs() < 1e-12 * p.eta4);
            prop_assert!((v - p.psi(x + l)).abs() < 1e-12 * p.eta4);
        }

        #[test]
        fn eta4_increases_with_speed(k1 in 0.05f64..0.9, dk in 1e-3f64..0.05, l in 0.5f64..10.0) {
            let p1 = params_from_kappa(l, k1).unwrap();
            let p2 = params_from_kappa(l, k1 + dk).unwrap();
            prop_assert!(p1.c < p2.c);
            prop_assert!(p1.eta4 < p2.eta4);
        }
    }
}
