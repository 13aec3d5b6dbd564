//! Bilinear Fourier multiplier `T(f, g)` on finitely supported trigonometric
//! polynomials over `[0, 2π)`, with exact time dependence for checking its
//! operator identity
//!
//! ```text
//! (∂_t + ∂_x³) T(f, g) − T((∂_t + ∂_x³) f, g) − T(f, ∂_t g) = f ∂_x g.
//! ```

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::collections::BTreeMap;

/// Finitely supported `Σ c_k e^{ikx}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrigPolynomial {
    coeffs: BTreeMap<i64, Complex64>,
}

impl TrigPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    /// `c e^{ikx}`.
    pub fn mode(k: i64, c: Complex64) -> Self {
        let mut p = Self::zero();
        p.add_term(k, c);
        p
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (i64, Complex64)>) -> Self {
        let mut p = Self::zero();
        for (k, c) in terms {
            p.add_term(k, c);
        }
        p
    }

    pub fn add_term(&mut self, k: i64, c: Complex64) {
        if c == Complex64::new(0.0, 0.0) {
            return;
        }
        let slot = self.coeffs.entry(k).or_insert(Complex64::new(0.0, 0.0));
        *slot += c;
        if *slot == Complex64::new(0.0, 0.0) {
            self.coeffs.remove(&k);
        }
    }

    pub fn coefficient(&self, k: i64) -> Complex64 {
        self.coeffs.get(&k).copied().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.coeffs.iter().map(|(&k, &c)| (k, c))
    }

    pub fn support_len(&self) -> usize {
        self.coeffs.len()
    }

    /// Whether mode 0 is present.
    pub fn has_mean(&self) -> bool {
        self.coeffs.contains_key(&0)
    }

    pub fn without_mean(&self) -> Self {
        let mut p = self.clone();
        p.coeffs.remove(&0);
        p
    }

    pub fn scale(&self, a: Complex64) -> Self {
        Self::from_terms(self.terms().map(|(k, c)| (k, a * c)))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_terms(self.terms().chain(other.terms()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut p = Self::zero();
        for (k1, a) in self.terms() {
            for (k2, b) in other.terms() {
                p.add_term(k1 + k2, a * b);
            }
        }
        p
    }

    /// `∂_x^order`.
    pub fn derivative(&self, order: u32) -> Self {
        Self::from_terms(self.terms().map(|(k, c)| (k, c * Complex64::new(0.0, k as f64).powu(order))))
    }

    pub fn sup_norm_coeffs(&self) -> f64 {
        self.coeffs.values().fold(0.0, |m, c| m.max(c.norm()))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.terms().all(|(k, c)| (c - self.coefficient(-k).conj()).norm() <= tol)
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        self.terms().map(|(k, c)| c * Complex64::from_polar(1.0, k as f64 * x)).sum()
    }
}

/// Multiplier symbol for the interaction `(k₁, k₂)`, output mode `k = k₁ + k₂`.
pub fn symbol(k1: i64, k2: i64) -> f64 {
    let (a, k) = (k1 as f64, (k1 + k2) as f64);
    -1.0 / (a * a + k * k + a * k)
}

fn require_mean_zero(g: impl Iterator<Item = (i64, Complex64)>) -> Result<()> {
    let mean: f64 = g.filter(|(k, _)| *k == 0).map(|(_, c)| c.norm()).sum();
    if mean > 0.0 {
        return Err(Error::MeanZero(mean));
    }
    Ok(())
}

/// `T(f, g)` by direct double summation; `g` must have no mode-0 coefficient.
pub fn normal_form_t(f: &TrigPolynomial, g: &TrigPolynomial) -> Result<TrigPolynomial> {
    require_mean_zero(g.terms())?;
    let mut out = TrigPolynomial::zero();
    for (k1, a) in f.terms() {
        for (k2, b) in g.terms() {
            out.add_term(k1 + k2, symbol(k1, k2) * a * b);
        }
    }
    Ok(out)
}

/// `a e^{iωt} e^{ikx}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedTerm {
    pub k: i64,
    pub amplitude: Complex64,
    pub omega: f64,
}

/// Finite sum of [`TimedTerm`]s; time derivatives are exact.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimedPolynomial {
    pub terms: Vec<TimedTerm>,
}

impl TimedPolynomial {
    pub fn new(terms: Vec<TimedTerm>) -> Self {
        Self { terms }
    }

    pub fn at(&self, t: f64) -> TrigPolynomial {
        TrigPolynomial::from_terms(
            self.terms.iter().map(|s| (s.k, s.amplitude * Complex64::from_polar(1.0, s.omega * t))),
        )
    }

    fn map(&self, f: impl Fn(&TimedTerm) -> Complex64) -> Self {
        Self::new(self.terms.iter().map(|s| TimedTerm { amplitude: f(s), ..*s }).collect())
    }

    pub fn time_derivative(&self) -> Self {
        self.map(|s| s.amplitude * Complex64::new(0.0, s.omega))
    }

    /// `(∂_t + ∂_x³)`.
    pub fn airy(&self) -> Self {
        self.map(|s| s.amplitude * Complex64::new(0.0, s.omega - (s.k as f64).powi(3)))
    }
}

/// `T` on timed polynomials: frequencies add, so the result stays exact in time.
pub fn normal_form_t_timed(f: &TimedPolynomial, g: &TimedPolynomial) -> Result<TimedPolynomial> {
    require_mean_zero(g.terms.iter().map(|s| (s.k, s.amplitude)))?;
    let mut terms = Vec::with_capacity(f.terms.len() * g.terms.len());
    for a in &f.terms {
        for b in &g.terms {
            terms.push(TimedTerm {
                k: a.k + b.k,
                amplitude: symbol(a.k, b.k) * a.amplitude * b.amplitude,
                omega: a.omega + b.omega,
            });
        }
    }
    Ok(TimedPolynomial::new(terms))
}

/// Residual of the operator identity at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResidual {
    /// Largest coefficient of the residual polynomial.
    pub absolute: f64,
    /// Largest coefficient among the four individual terms.
    pub scale: f64,
}

/// Evaluates `(∂_t + ∂_x³)T(f, g) − T((∂_t + ∂_x³)f, g) − T(f, ∂_t g) − f ∂_x g` mode by mode.
pub fn verify_identity(f: &TimedPolynomial, g: &TimedPolynomial, t: f64) -> Result<IdentityResidual> {
    let lhs = normal_form_t_timed(f, g)?.airy().at(t);
    let first = normal_form_t_timed(&f.airy(), g)?.at(t);
    let second = normal_form_t_timed(f, &g.time_derivative())?.at(t);
    let product = f.at(t).mul(&g.at(t).derivative(1));
    let residual = lhs.sub(&first).sub(&second).sub(&product);
    let scale = [&lhs, &first, &second, &product].iter().fold(0.0_f64, |m, p| m.max(p.sup_norm_coeffs()));
    Ok(IdentityResidual { absolute: residual.sup_norm_coeffs(), scale })
}

/// `|k₂| · |T(e^{ik₁x}, e^{ik₂x})|`, which decays like `|k₂|⁻¹` for fixed `k₁`.
pub fn smoothing_metric(k1: i64, k2: i64) -> Result<f64> {
    let one = Complex64::new(1.0, 0.0);
    let out = normal_form_t(&TrigPolynomial::mode(k1, one), &TrigPolynomial::mode(k2, one))?;
    Ok(k2.unsigned_abs() as f64 * out.coefficient(k1 + k2).norm())
}

/// Successive ratios `s(k₂ᵢ) / s(k₂ᵢ₊₁)` of [`smoothing_metric`].
pub fn smoothing_ratios(k1: i64, k2s: &[i64]) -> Result<Vec<f64>> {
    let s = k2s.iter().map(|&k2| smoothing_metric(k1, k2)).collect::<Result<Vec<f64>>>()?;
    Ok(s.windows(2).map(|w| w[0] / w[1]).collect())
}
