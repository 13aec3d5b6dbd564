//! Quadrature pipeline for the Hamiltonian index: the non-periodic kernel
//! companion φ of `L₊`, closed-form pairings, `L₊⁻¹` on even functions and the
//! 3×3 matrix `D = (⟨H eᵢ, eⱼ⟩)`.
//!
//! All pairings are over the symmetric period `[−L/2, L/2]`, where φ is taken
//! as its even extension.

use crate::error::{Error, Result};
use crate::fourier::CosineSeries;
use crate::quad::{gauss_legendre, integrate};
use crate::wave::{GridFunction, WaveParams};

/// Relative tolerance of the one-dimensional quadratures.
pub const QUAD_TOL: f64 = 1e-11;
/// Asymmetry above which [`linv_apply`] refuses its input.
pub const SYMMETRY_TOL: f64 = 1e-8;

const CELL_ORDER: usize = 8;

/// Elliptic-function values at `y = αξ` shared by the integrands.
#[derive(Debug, Clone, Copy)]
struct Jac {
    sn: f64,
    cn: f64,
    dn: f64,
    /// `1 + β² sn²`
    b: f64,
}

impl Jac {
    fn at(p: &WaveParams, y: f64) -> Self {
        let (sn, cn, dn) = crate::elliptic::jacobi_sn_cn_dn(y, p.kappa);
        Self { sn, cn, dn, b: 1.0 + p.beta_sq * sn * sn }
    }

    /// `3(κ² + β²) + 5β² dn²`
    fn bracket(&self, p: &WaveParams) -> f64 {
        3.0 * (p.kappa_sq() + p.beta_sq) + 5.0 * p.beta_sq * self.dn * self.dn
    }

    /// `1 − 2 sn²`
    fn w(&self) -> f64 {
        1.0 - 2.0 * self.sn * self.sn
    }
}

/// Inner integrand `G(y)` of the companion φ.
fn inner_integrand(p: &WaveParams, y: f64) -> f64 {
    let j = Jac::at(p, y);
    j.b.powi(3) * j.bracket(p) * j.w() / j.dn.powi(4)
}

/// The six quadratures over `[0, K]` that close the pairings of φ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AIntegrals {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    pub a6: f64,
}

pub fn a_integrals(p: &WaveParams) -> Result<AIntegrals> {
    let quad = |g: &dyn Fn(Jac) -> f64| integrate(&|y| g(Jac::at(p, y)), 0.0, p.big_k, QUAD_TOL);
    let a1 = quad(&|j| j.b * j.b * j.w() / (j.dn * j.dn))?;
    let a2 = quad(&|j| j.b.powi(3) * j.bracket(p) * j.w() / j.dn.powi(4))?;
    let a3 = quad(&|j| j.b * j.b * j.bracket(p) * j.w() / (j.dn * j.dn))?;
    let a4 = quad(&|j| j.b * j.w())?;
    let a6 = quad(&|j| j.b * j.bracket(p) * j.w())?;
    Ok(AIntegrals { a1, a2, a3, a4, a5: a2, a6 })
}

/// `∫ψⁿ` over one period, `n = 1..=4`.
pub fn psi_power_integrals(p: &WaveParams) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    for (i, slot) in out.iter_mut().enumerate() {
        let n = (i + 1) as i32;
        let inner = integrate(
            &|y| {
                let j = Jac::at(p, y);
                j.dn.powi(2 * n) / j.b.powi(n)
            },
            0.0,
            p.big_k,
            QUAD_TOL,
        )?;
        *slot = p.eta4.powi(n) * p.period / p.big_k * inner;
    }
    Ok(out)
}

/// Values at the half period `ξ = L/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPeriodData {
    pub psi: f64,
    pub psi_second: f64,
    pub varphi_prime: f64,
}

pub fn half_period_data(p: &WaveParams, a: &AIntegrals) -> HalfPeriodData {
    let kp2 = p.kappa_prime_sq();
    let ks = p.kappa_sq() + p.beta_sq;
    let b1 = 1.0 + p.beta_sq;
    HalfPeriodData {
        psi: p.eta4 * kp2 / b1,
        psi_second: 2.0 * p.alpha * p.alpha * p.eta4 * ks * kp2 / (b1 * b1),
        varphi_prime: p.period * kp2 * a.a2 / (4.0 * p.eta4 * p.big_k * ks * b1 * b1),
    }
}

/// `⟨φ, 1⟩` and `⟨φ, ψ⟩` over the symmetric period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pairings {
    pub ip_1: f64,
    pub ip_psi: f64,
}

pub fn varphi_pairings(p: &WaveParams, a: &AIntegrals) -> Pairings {
    let kp2 = p.kappa_prime_sq();
    let ks = p.kappa_sq() + p.beta_sq;
    let b1 = 1.0 + p.beta_sq;
    let pre = p.period.powi(3) / (8.0 * p.big_k.powi(3) * ks);
    Pairings {
        ip_1: pre / p.eta4 * (a.a1 + kp2 * a.a2 / (2.0 * ks * b1) - a.a3 / (2.0 * ks)),
        ip_psi: pre * (a.a4 + kp2 * kp2 * a.a5 / (4.0 * ks * b1 * b1) - a.a6 / (4.0 * ks)),
    }
}

/// Dense representation of the companion φ on `[0, L]`.
#[derive(Debug, Clone)]
pub struct VarphiTable {
    pub params: WaveParams,
    /// Cell boundaries `x_j = jL/M`.
    pub grid: Vec<f64>,
    pub varphi: Vec<f64>,
    pub varphi_prime: Vec<f64>,
    /// `∫₀^{αx_j} G(y) dy`
    pub inner_cumulative: Vec<f64>,
    pub varphi_half_prime: f64,
    pub varphi_0: f64,
    /// `1/(2α²η₄(κ² + β²))`
    pub scale: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

pub fn build_varphi(p: &WaveParams, n: usize) -> Result<VarphiTable> {
    if n < 1024 {
        return Err(Error::Shape(format!("companion table needs at least 1024 cells, got {n}")));
    }
    let n = if n % 2 == 1 { n + 1 } else { n };
    let (nodes, weights) = gauss_legendre(CELL_ORDER);
    let scale = 1.0 / (2.0 * p.alpha * p.alpha * p.eta4 * (p.kappa_sq() + p.beta_sq));
    let dx = p.period / n as f64;
    let grid: Vec<f64> = (0..=n).map(|j| j as f64 * dx).collect();
    let mut inner_cumulative = Vec::with_capacity(n + 1);
    inner_cumulative.push(0.0);
    let mut acc = 0.0;
    for j in 0..n {
        let (y0, y1) = (p.alpha * grid[j], p.alpha * grid[j + 1]);
        acc += gauss_on(&nodes, &weights, y0, y1, |y| inner_integrand(p, y));
        inner_cumulative.push(acc);
    }
    let mut table = VarphiTable {
        params: p.clone(),
        grid,
        varphi: Vec::new(),
        varphi_prime: Vec::new(),
        inner_cumulative,
        varphi_half_prime: 0.0,
        varphi_0: scale,
        scale,
        nodes,
        weights,
    };
    let (vals, ders): (Vec<f64>, Vec<f64>) = (0..=n)
        .map(|j| {
            let y = p.alpha * table.grid[j];
            table.value_and_derivative(y, table.inner_cumulative[j])
        })
        .unzip();
    table.varphi = vals;
    table.varphi_prime = ders;
    table.varphi_half_prime = table.varphi_prime[n / 2];
    Ok(table)
}

fn gauss_on(nodes: &[f64], weights: &[f64], a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    half * nodes.iter().zip(weights).map(|(x, w)| w * f(mid + half * x)).sum::<f64>()
}

impl VarphiTable {
    pub fn cells(&self) -> usize {
        self.grid.len() - 1
    }

    fn value_and_derivative(&self, y: f64, inner: f64) -> (f64, f64) {
        let p = &self.params;
        let j = Jac::at(p, y);
        let (sn, cn, dn, b) = (j.sn, j.cn, j.dn, j.b);
        let k2 = p.kappa_sq();
        let w = j.w();
        let s = sn * cn * dn / (b * b);
        let db = 2.0 * p.beta_sq * sn * cn * dn;
        let triple = cn * cn * dn * dn - sn * sn * dn * dn - k2 * sn * sn * cn * cn;
        let ds = triple / (b * b) - 2.0 * sn * cn * dn * db / b.powi(3);
        let lead = b * b * w / (dn * dn);
        let dlead = 2.0 * b * db * w / (dn * dn) - 4.0 * b * b * sn * cn / dn
            + 2.0 * k2 * b * b * w * sn * cn / dn.powi(3);
        let g = b.powi(3) * j.bracket(p) * w / dn.powi(4);
        let value = self.scale * (lead - s * inner);
        let deriv = p.alpha * self.scale * (dlead - ds * inner - s * g);
        (value, deriv)
    }

    fn inner_at(&self, x: f64) -> f64 {
        let dx = self.grid[1];
        let cell = ((x / dx).floor() as usize).min(self.cells() - 1);
        let p = &self.params;
        let (y0, y) = (p.alpha * self.grid[cell], p.alpha * x);
        self.inner_cumulative[cell] + gauss_on(&self.nodes, &self.weights, y0, y, |s| inner_integrand(p, s))
    }

    /// `(φ(x), φ'(x))` for `x ∈ [−L, L]`, using evenness for negative `x`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let l = self.params.period;
        assert!(x.abs() <= l * (1.0 + 1e-12), "companion is tabulated on [-L, L] only");
        let ax = x.abs().min(l);
        let (v, d) = self.value_and_derivative(self.params.alpha * ax, self.inner_at(ax));
        (v, if x < 0.0 { -d } else { d })
    }

    /// `ψ'φ' − ψ''φ` at `x`.
    pub fn wronskian(&self, x: f64) -> f64 {
        let (v, d) = self.eval(x);
        let p = &self.params;
        p.psi_prime(x) * d - p.psi_second(x) * v
    }
}

/// `φ'(L⁻) − φ'(0⁺)`; nonzero exactly when φ fails to be periodic.
pub fn non_periodicity_gap(t: &VarphiTable) -> f64 {
    t.varphi_prime[t.cells()] - t.varphi_prime[0]
}

/// Applies `L₊⁻¹` to an even grid function, returning the even periodic
/// solution with `⟨u, ψ'⟩ = 0` automatically by parity.
pub fn linv_apply(p: &WaveParams, t: &VarphiTable, f: &GridFunction) -> Result<GridFunction> {
    let n = f.len();
    if (f.period() - p.period).abs() > 1e-12 * p.period {
        return Err(Error::Shape(format!("grid period {} differs from wave period {}", f.period(), p.period)));
    }
    let asym = f.asymmetry();
    if asym > SYMMETRY_TOL * f.sup_norm().max(1.0) {
        return Err(Error::Symmetry(asym));
    }
    let sym: Vec<f64> = (0..n).map(|j| 0.5 * (f.samples()[j] + f.samples()[(n - j) % n])).collect();
    let series = CosineSeries::from_samples(&sym, p.period);
    let half = n / 2;
    let dx = f.spacing();
    let mut phi_f = vec![0.0; half + 1];
    let mut dpsi_f = vec![0.0; half + 1];
    for j in 0..half {
        let (a, b) = (j as f64 * dx, (j + 1) as f64 * dx);
        let (mut s1, mut s2) = (0.0, 0.0);
        let h = 0.5 * (b - a);
        for (x, w) in t.nodes.iter().zip(&t.weights) {
            let xi = 0.5 * (a + b) + h * x;
            let fv = series.eval(xi);
            s1 += w * t.eval(xi).0 * fv;
            s2 += w * p.psi_prime(xi) * fv;
        }
        phi_f[j + 1] = phi_f[j] + h * s1;
        dpsi_f[j + 1] = dpsi_f[j] + h * s2;
    }
    let hd = half_period_data_from_table(p, t);
    let ratio = hd.psi_second / (2.0 * hd.varphi_prime);
    let coeff = dpsi_f[half] - ratio * 2.0 * phi_f[half];
    let mut out = vec![0.0; n];
    for j in 0..=half {
        let x = j as f64 * dx;
        let u = p.psi_prime(x) * phi_f[j] - t.eval(x).0 * dpsi_f[j] + coeff * t.eval(x).0;
        out[j] = u;
        if j > 0 && j < half {
            out[n - j] = u;
        }
    }
    GridFunction::new(p.period, out)
}

fn half_period_data_from_table(p: &WaveParams, t: &VarphiTable) -> HalfPeriodData {
    let kp2 = p.kappa_prime_sq();
    let ks = p.kappa_sq() + p.beta_sq;
    let b1 = 1.0 + p.beta_sq;
    HalfPeriodData {
        psi: p.eta4 * kp2 / b1,
        psi_second: 2.0 * p.alpha * p.alpha * p.eta4 * ks * kp2 / (b1 * b1),
        varphi_prime: t.varphi_half_prime,
    }
}

/// Scalar pairings `⟨L₊⁻¹f, g⟩` for `f, g ∈ {1, ψ, ψ³}` and the ingredients behind them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexScalars {
    pub a: AIntegrals,
    pub pairings: Pairings,
    pub half: HalfPeriodData,
    /// `∫ψ, ∫ψ², ∫ψ³, ∫ψ⁴`
    pub psi_powers: [f64; 4],
    pub psi_cube_varphi: f64,
    pub psi_sq_varphi: f64,
    pub linv_1_1: f64,
    pub linv_psi_1: f64,
    pub linv_psi_psi: f64,
    pub linv_cube_1: f64,
    pub linv_cube_psi: f64,
    pub linv_cube_cube: f64,
}

pub fn index_scalars(p: &WaveParams) -> Result<IndexScalars> {
    let a = a_integrals(p)?;
    let pairings = varphi_pairings(p, &a);
    let half = half_period_data(p, &a);
    let psi_powers = psi_power_integrals(p)?;
    let c = p.c;
    let (ip1, ipp) = (pairings.ip_1, pairings.ip_psi);
    let (pm, dphim) = (half.psi, half.varphi_prime);
    let r = half.psi_second / (2.0 * dphim);
    let psi_cube_varphi = -2.0 * c * pm * dphim - c * p.f1 * ip1;
    let psi_sq_varphi = -4.0 * c / 3.0 * dphim + 2.0 * c * c / 3.0 * ip1;
    let linv_1_1 = -2.0 * ipp + (2.0 * pm - r * ip1) * ip1;
    let linv_psi_1 = -1.5 * psi_sq_varphi + 0.5 * pm * pm * ip1 + (pm - r * ip1) * ipp;
    let linv_psi_psi = -psi_cube_varphi + (pm * pm - r * ipp) * ipp;
    let linv_cube_1 = -c * psi_powers[0] - c * p.f1 * linv_1_1;
    let linv_cube_psi = -c * psi_powers[1] - c * p.f1 * linv_psi_1;
    let linv_cube_cube = -c * psi_powers[3] - c * p.f1 * linv_cube_1;
    Ok(IndexScalars {
        a,
        pairings,
        half,
        psi_powers,
        psi_cube_varphi,
        psi_sq_varphi,
        linv_1_1,
        linv_psi_1,
        linv_psi_psi,
        linv_cube_1,
        linv_cube_psi,
        linv_cube_cube,
    })
}

/// Symmetric matrix of pairings over the generalized kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DMatrix {
    pub entries: [[f64; 3]; 3],
    pub det: f64,
    pub n_negative: usize,
    /// Ascending.
    pub eigenvalues: [f64; 3],
    pub kappa: f64,
    pub period: f64,
}

impl DMatrix {
    pub fn from_entries(entries: [[f64; 3]; 3], kappa: f64, period: f64) -> Self {
        let eigenvalues = sym3_eigenvalues(&entries);
        let e = &entries;
        let det = e[0][0] * (e[1][1] * e[2][2] - e[1][2] * e[2][1])
            - e[0][1] * (e[1][0] * e[2][2] - e[1][2] * e[2][0])
            + e[0][2] * (e[1][0] * e[2][1] - e[1][1] * e[2][0]);
        let n_negative = eigenvalues.iter().filter(|&&l| l < 0.0).count();
        Self { entries, det, n_negative, eigenvalues, kappa, period }
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_degenerate(&self) -> bool {
        self.det.abs() < 1e-12 * self.norm().powi(3)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let e = &self.entries;
        let mut m: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                m = m.max((e[i][j] - e[j][i]).abs());
            }
        }
        m / self.norm().max(f64::MIN_POSITIVE)
    }
}

/// Fills `D` from the scalar pairings. Generalized kernel vectors:
/// `e₁ = (L₊⁻¹1, ψL₊⁻¹1/c)`, `e₂ = (L₊⁻¹ψ/c, 1/c + ψL₊⁻¹ψ/c²)`,
/// `e₃ = (w, ψw/c + ψ²/(2c²))` with `w = L₊⁻¹ψ³/(2c²) + L₊⁻¹ψ`.
pub fn dmatrix_entries(p: &WaveParams, s: &IndexScalars) -> [[f64; 3]; 3] {
    let c = p.c;
    let [_, psi2, _, psi4] = s.psi_powers;
    let d11 = s.linv_1_1;
    let d12 = s.linv_psi_1 / c;
    let d13 = s.linv_psi_1 + s.linv_cube_1 / (2.0 * c * c);
    let d22 = p.period / c + s.linv_psi_psi / (c * c);
    let d23 = s.linv_cube_psi / (2.0 * c.powi(3)) + s.linv_psi_psi / c + psi2 / (2.0 * c * c);
    let d33 = s.linv_cube_psi / (c * c)
        + s.linv_psi_psi
        + s.linv_cube_cube / (4.0 * c.powi(4))
        + psi4 / (4.0 * c.powi(3));
    [[d11, d12, d13], [d12, d22, d23], [d13, d23, d33]]
}

pub fn assemble_dmatrix(p: &WaveParams) -> Result<DMatrix> {
    let s = index_scalars(p)?;
    let d = DMatrix::from_entries(dmatrix_entries(p, &s), p.kappa.value(), p.period);
    if !d.det.is_finite() || d.is_degenerate() {
        return Err(Error::DegenerateD { det: d.det, scale: d.norm().powi(3) });
    }
    Ok(d)
}

/// `k_Ham` with its ingredients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HamiltonianIndex {
    pub k_ham: usize,
    pub n_d: usize,
    pub n_h: usize,
}

/// `k_Ham = 2 − n(D)`, the count that assumes `n(H) = 2`.
pub fn hamiltonian_index(d: &DMatrix) -> Result<HamiltonianIndex> {
    hamiltonian_index_with_morse(d, 2)
}

/// `k_Ham = n(H) − n(D)` with a measured Morse index of `H`.
pub fn hamiltonian_index_with_morse(d: &DMatrix, n_h: usize) -> Result<HamiltonianIndex> {
    if d.is_degenerate() {
        return Err(Error::DegenerateD { det: d.det, scale: d.norm().powi(3) });
    }
    if d.n_negative > n_h {
        return Err(Error::InconsistentIndex(format!(
            "n(D) = {} exceeds n(H) = {n_h}, giving a negative instability count",
            d.n_negative
        )));
    }
    Ok(HamiltonianIndex { k_ham: n_h - d.n_negative, n_d: d.n_negative, n_h })
}

/// Eigenvalues of a symmetric 3×3 matrix, ascending, by the trigonometric
/// solution of the characteristic cubic.
pub fn sym3_eigenvalues(m: &[[f64; 3]; 3]) -> [f64; 3] {
    let p1 = m[0][1].powi(2) + m[0][2].powi(2) + m[1][2].powi(2);
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    let p2 = (m[0][0] - q).powi(2) + (m[1][1] - q).powi(2) + (m[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p == 0.0 {
        return [q; 3];
    }
    let mut b = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            b[i][j] = (m[i][j] - if i == j { q } else { 0.0 }) / p;
        }
    }
    let det_b = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
        - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let r = (det_b / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let largest = q + 2.0 * p * phi.cos();
    let smallest = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let middle = 3.0 * q - largest - smallest;
    [smallest, middle, largest]
}
