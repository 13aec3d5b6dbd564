//! Fourier-collocation matrices of the linearized operators and their spectra.

use crate::error::{Error, Result};
use crate::index::DMatrix;
use crate::wave::{GridFunction, WaveParams};
use faer::{Mat, Side};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Relative zero threshold for Morse counts, as a multiple of the spectral radius.
pub const MORSE_ZERO_REL: f64 = 1e-11;
/// Real parts above this count as unstable.
pub const UNSTABLE_RE_TOL: f64 = 1e-6;
/// Imaginary-part snapping tolerance, relative to the largest eigenvalue modulus.
pub const SNAP_REL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// `−∂² + c − 3ψ²/(2c)`
    Lplus,
    /// `−∂² + c − ψ²/(2c)`
    Lminus,
    /// `[[L₋, −ψ], [−ψ, c]]`
    Hcal,
    /// `∂ H`
    DHcal,
}

impl OperatorKind {
    pub fn is_symmetric(self) -> bool {
        !matches!(self, OperatorKind::DHcal)
    }
}

#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub kind: OperatorKind,
    /// Grid points per component.
    pub n: usize,
    pub entries: Mat<f64>,
    pub period: f64,
}

impl OperatorMatrix {
    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let m = &self.entries;
        let mut worst: f64 = 0.0;
        for i in 0..m.nrows() {
            for j in 0..i {
                worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let m = &self.entries;
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum()).collect()
    }

    pub fn inf_norm(&self) -> f64 {
        let m = &self.entries;
        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max)
    }
}

/// Spectral first and second derivative matrices on `n` points of `[0, L)`.
/// The first-derivative matrix annihilates the Nyquist mode.
pub fn differentiation_matrices(n: usize, period: f64) -> (Mat<f64>, Mat<f64>) {
    let s = 2.0 * PI / period;
    let nf = n as f64;
    let d1 = Mat::from_fn(n, n, |i, j| {
        if i == j {
            return 0.0;
        }
        let d = i as f64 - j as f64;
        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        s * 0.5 * sign / (d * PI / nf).tan()
    });
    let d2 = Mat::from_fn(n, n, |i, j| {
        if i == j {
            return s * s * (-nf * nf / 12.0 - 1.0 / 6.0);
        }
        let d = i as f64 - j as f64;
        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        -s * s * sign / (2.0 * (d * PI / nf).sin().powi(2))
    });
    (d1, d2)
}

/// Circulant matrix of `(−∂² + γ)^{-1/2}` on the collocation grid, Nyquist mode included.
fn inverse_sqrt_shifted_laplacian(n: usize, period: f64, gamma: f64) -> Mat<f64> {
    let s = 2.0 * PI / period;
    let symbol = |k: usize| {
        let m = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        1.0 / (s * s * m * m + gamma).sqrt()
    };
    let column: Vec<f64> = (0..n)
        .map(|d| (0..n).map(|k| symbol(k) * (2.0 * PI * ((k * d) % n) as f64 / n as f64).cos()).sum::<f64>() / n as f64)
        .collect();
    Mat::from_fn(n, n, |i, j| column[(i + n - j) % n])
}

/// `−∂² + Q` for a sampled potential.
pub fn assemble_hill(potential: &GridFunction) -> OperatorMatrix {
    let n = potential.len();
    let (_, d2) = differentiation_matrices(n, potential.period());
    let q = potential.samples();
    let entries = Mat::from_fn(n, n, |i, j| -d2[(i, j)] + if i == j { q[i] } else { 0.0 });
    OperatorMatrix { kind: OperatorKind::Lplus, n, entries, period: potential.period() }
}

pub fn assemble(kind: OperatorKind, p: &WaveParams, n: usize) -> Result<OperatorMatrix> {
    if n < 128 || !n.is_power_of_two() {
        return Err(Error::Shape(format!("collocation grid must be a power of two ≥ 128, got {n}")));
    }
    let psi: Vec<f64> = (0..n).map(|j| p.psi(j as f64 * p.period / n as f64)).collect();
    Ok(assemble_with_profile(kind, p.c, p.period, &psi))
}

/// Assembles around an arbitrary sampled profile `ψ` with speed `c`.
pub fn assemble_with_profile(kind: OperatorKind, c: f64, period: f64, psi: &[f64]) -> OperatorMatrix {
    let n = psi.len();
    let (d1, d2) = differentiation_matrices(n, period);
    let hill = |factor: f64| {
        Mat::from_fn(n, n, |i, j| -d2[(i, j)] + if i == j { c - factor * psi[i] * psi[i] / c } else { 0.0 })
    };
    let entries = match kind {
        OperatorKind::Lplus => hill(1.5),
        OperatorKind::Lminus => hill(0.5),
        OperatorKind::Hcal | OperatorKind::DHcal => {
            let lm = hill(0.5);
            let h = Mat::from_fn(2 * n, 2 * n, |i, j| match (i < n, j < n) {
                (true, true) => lm[(i, j)],
                (true, false) => if i == j - n { -psi[i] } else { 0.0 },
                (false, true) => if i - n == j { -psi[j] } else { 0.0 },
                (false, false) => if i == j { c } else { 0.0 },
            });
            if kind == OperatorKind::Hcal {
                h
            } else {
                let mut dh = Mat::zeros(2 * n, 2 * n);
                for block in 0..2 {
                    let off = block * n;
                    for i in 0..n {
                        for k in 0..n {
                            let dik = d1[(i, k)];
                            if dik == 0.0 {
                                continue;
                            }
                            for j in 0..2 * n {
                                dh[(off + i, j)] += dik * h[(off + k, j)];
                            }
                        }
                    }
                }
                dh
            }
        }
    };
    OperatorMatrix { kind, n, entries, period }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorseIndex {
    pub n_neg: usize,
    pub n_zero: usize,
    pub zero_tol: f64,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
}

fn symmetric_eigen(m: &OperatorMatrix) -> Result<(Vec<f64>, Mat<f64>)> {
    if !m.kind.is_symmetric() {
        return Err(Error::Domain("symmetric eigensolve requested for a nonsymmetric operator".into()));
    }
    let evd = m
        .entries
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::NumericalFailure(format!("symmetric eigensolve failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let values: Vec<f64> = (0..m.size()).map(|i| s[i]).collect();
    Ok((values, evd.U().to_owned()))
}

/// Counts eigenvalues below `−zero_tol` and within `zero_tol` of zero.
/// The default tolerance is [`MORSE_ZERO_REL`] times the spectral radius.
pub fn morse_index(m: &OperatorMatrix, zero_tol: Option<f64>) -> Result<MorseIndex> {
    let (mut eigenvalues, _) = symmetric_eigen(m)?;
    eigenvalues.sort_by(f64::total_cmp);
    let radius = eigenvalues.iter().fold(0.0_f64, |r, v| r.max(v.abs()));
    let zero_tol = zero_tol.unwrap_or(MORSE_ZERO_REL * radius);
    let n_neg = eigenvalues.iter().filter(|&&v| v < -zero_tol).count();
    let n_zero = eigenvalues.iter().filter(|&&v| v.abs() <= zero_tol).count();
    Ok(MorseIndex { n_neg, n_zero, zero_tol, eigenvalues })
}

/// `|cos|` of the angle between the eigenvector of smallest `|λ|` and `reference`.
pub fn kernel_alignment(m: &OperatorMatrix, reference: &[f64]) -> Result<f64> {
    let (values, vectors) = symmetric_eigen(m)?;
    let i0 = (0..values.len())
        .min_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs()))
        .expect("nonempty spectrum");
    let dot: f64 = (0..values.len()).map(|i| vectors[(i, i0)] * reference[i]).sum();
    let nv: f64 = (0..values.len()).map(|i| vectors[(i, i0)].powi(2)).sum::<f64>().sqrt();
    let nr: f64 = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(dot.abs() / (nv * nr))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenClass {
    /// Part of the defective cluster at the origin.
    Zero,
    Real,
    Imaginary,
    Quadruplet,
}

impl EigenClass {
    pub fn label(self) -> &'static str {
        match self {
            EigenClass::Zero => "zero",
            EigenClass::Real => "real",
            EigenClass::Imaginary => "imaginary",
            EigenClass::Quadruplet => "quadruplet",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub value: Complex64,
    pub class: EigenClass,
    /// `⟨H z, z⟩/⟨z, z⟩` for purely imaginary eigenvalues.
    pub krein: Option<f64>,
    /// Distance to the nearest reflected partner `−λ̄`, relative to `max(1, |λ|)`.
    pub symmetry_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub n: usize,
    pub eigenpairs: Vec<Eigenpair>,
    pub n_lplus: usize,
    pub n_h: usize,
    /// Kernel alignment of `L₊` with `ψ'`.
    pub kernel_overlap_lplus: f64,
    /// Kernel alignment of `H` with `(ψ', φ')`.
    pub kernel_overlap_h: f64,
    pub k_r: usize,
    pub k_c: usize,
    pub krein_negative: usize,
    pub krein_positive: usize,
    pub zero_cluster: usize,
    pub zero_radius: f64,
    pub snap_tol: f64,
    /// Largest real part outside the zero cluster.
    pub max_re: f64,
    pub symmetry_residual: f64,
    pub n_d: Option<usize>,
}

impl SpectrumReport {
    /// `k_r + 2k_c + 2k_i⁻`
    pub fn k_ham(&self) -> usize {
        self.k_r + 2 * self.k_c + 2 * self.krein_negative
    }

    /// Whether `k_Ham = 2 − n(D)`.
    pub fn count_identity_fixed(&self) -> Option<bool> {
        self.n_d.map(|nd| self.k_ham() as i64 == 2 - nd as i64)
    }

    /// Whether `k_Ham = n(H) − n(D)` with the measured `n(H)`.
    pub fn count_identity_measured(&self) -> Option<bool> {
        self.n_d.map(|nd| self.k_ham() as i64 == self.n_h as i64 - nd as i64)
    }

    pub fn unstable(&self) -> impl Iterator<Item = &Eigenpair> {
        self.eigenpairs.iter().filter(|e| e.class != EigenClass::Zero && e.value.re > UNSTABLE_RE_TOL)
    }
}

/// Full eigen-analysis of `∂H` with Morse indices, Krein signs and symmetry checks.
pub fn unstable_modes(p: &WaveParams, n: usize, d: Option<&DMatrix>) -> Result<SpectrumReport> {
    if n < 256 || !n.is_power_of_two() {
        return Err(Error::Shape(format!("spectrum grid must be a power of two ≥ 256, got {n}")));
    }
    let lplus = assemble(OperatorKind::Lplus, p, n)?;
    let hcal = assemble(OperatorKind::Hcal, p, n)?;
    let dh = assemble(OperatorKind::DHcal, p, n)?;
    let n_lplus = morse_index(&lplus, None)?.n_neg;
    let n_h = morse_index(&hcal, None)?.n_neg;
    let dpsi: Vec<f64> = (0..n).map(|j| p.psi_prime(j as f64 * p.period / n as f64)).collect();
    let kernel_h: Vec<f64> = dpsi
        .iter()
        .copied()
        .chain((0..n).map(|j| {
            let x = j as f64 * p.period / n as f64;
            p.psi(x) * p.psi_prime(x) / p.c
        }))
        .collect();
    let kernel_overlap_lplus = kernel_alignment(&lplus, &dpsi)?;
    let kernel_overlap_h = kernel_alignment(&hcal, &kernel_h)?;

    let evd = dh
        .entries
        .eigen()
        .map_err(|e| Error::NumericalFailure(format!("nonsymmetric eigensolve failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let size = dh.size();
    let values: Vec<Complex64> = (0..size).map(|i| s[i]).collect();
    let radius = values.iter().fold(0.0_f64, |r, z| r.max(z.norm()));
    let norm = dh.inf_norm();
    let zero_radius = 10.0 * (f64::EPSILON * norm).powf(0.25);
    let snap_tol = SNAP_REL * radius;

    let mut eigenpairs = Vec::with_capacity(size);
    for (idx, &z) in values.iter().enumerate() {
        let class = if z.norm() <= zero_radius {
            EigenClass::Zero
        } else if z.re.abs() <= UNSTABLE_RE_TOL {
            EigenClass::Imaginary
        } else if z.im.abs() <= snap_tol {
            EigenClass::Real
        } else {
            EigenClass::Quadruplet
        };
        let krein = (class == EigenClass::Imaginary).then(|| {
            let a: Vec<f64> = (0..size).map(|i| u[(i, idx)].re).collect();
            let b: Vec<f64> = (0..size).map(|i| u[(i, idx)].im).collect();
            let ha = hcal.apply(&a);
            let hb = hcal.apply(&b);
            let num: f64 = (0..size).map(|i| a[i] * ha[i] + b[i] * hb[i]).sum();
            let den: f64 = (0..size).map(|i| a[i] * a[i] + b[i] * b[i]).sum();
            num / den
        });
        let partner = -z.conj();
        let symmetry_residual = values
            .iter()
            .map(|w| (w - partner).norm().min((w - z.conj()).norm().max((w + z).norm())))
            .fold(f64::INFINITY, f64::min)
            / z.norm().max(1.0);
        eigenpairs.push(Eigenpair { value: z, class, krein, symmetry_residual });
    }
    eigenpairs.sort_by(|a, b| b.value.re.total_cmp(&a.value.re).then(b.value.im.total_cmp(&a.value.im)));

    let outside = || eigenpairs.iter().filter(|e| e.class != EigenClass::Zero);
    let k_r = outside().filter(|e| e.class == EigenClass::Real && e.value.re > 0.0).count();
    let k_c = outside().filter(|e| e.class == EigenClass::Quadruplet && e.value.re > 0.0 && e.value.im > 0.0).count();
    let krein_negative = outside()
        .filter(|e| e.class == EigenClass::Imaginary && e.value.im > 0.0 && e.krein.is_some_and(|k| k < 0.0))
        .count();
    let krein_positive = outside()
        .filter(|e| e.class == EigenClass::Imaginary && e.value.im > 0.0 && e.krein.is_some_and(|k| k > 0.0))
        .count();
    let max_re = outside().map(|e| e.value.re).fold(f64::NEG_INFINITY, f64::max);
    let symmetry_residual = outside().map(|e| e.symmetry_residual).fold(0.0, f64::max);
    let zero_cluster = eigenpairs.len() - outside().count();

    Ok(SpectrumReport {
        n,
        eigenpairs,
        n_lplus,
        n_h,
        kernel_overlap_lplus,
        kernel_overlap_h,
        k_r,
        k_c,
        krein_negative,
        krein_positive,
        zero_cluster,
        zero_radius,
        snap_tol,
        max_re,
        symmetry_residual,
        n_d: d.map(|d| d.n_negative),
    })
}

/// Unstable eigenfunction `(U, V)` of `∂H` belonging to the real eigenvalue
/// with largest real part, together with that eigenvalue.
pub fn unstable_eigenfunction(p: &WaveParams, n: usize) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let dh = assemble(OperatorKind::DHcal, p, n)?;
    let evd = dh
        .entries
        .eigen()
        .map_err(|e| Error::NumericalFailure(format!("nonsymmetric eigensolve failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let size = dh.size();
    let radius = (0..size).fold(0.0_f64, |r, i| r.max(s[i].norm()));
    let zero_radius = 10.0 * (f64::EPSILON * dh.inf_norm()).powf(0.25);
    let snap_tol = SNAP_REL * radius;
    let best = (0..size)
        .filter(|&i| s[i].norm() > zero_radius && s[i].im.abs() <= snap_tol)
        .max_by(|&a, &b| s[a].re.total_cmp(&s[b].re));
    let max_re = (0..size).filter(|&i| s[i].norm() > zero_radius).map(|i| s[i].re).fold(f64::NEG_INFINITY, f64::max);
    match best {
        Some(i) if s[i].re > UNSTABLE_RE_TOL => {
            // rotate the eigenvector to be real
            let col: Vec<Complex64> = (0..size).map(|r| u[(r, i)]).collect();
            let pivot = col.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(Complex64::new(1.0, 0.0));
            let phase = pivot.conj() / pivot.norm();
            let real: Vec<f64> = col.iter().map(|z| (z * phase).re).collect();
            let (uu, vv) = real.split_at(n);
            Ok((s[i].re, uu.to_vec(), vv.to_vec()))
        }
        _ => Err(Error::NoUnstableMode { max_re }),
    }
}

/// Values of `⟨L₊⁻¹f, g⟩` and `D` from a dense eigen-decomposition of `L₊`,
/// inverting off the eigenvector of smallest `|λ|`.
#[derive(Debug, Clone)]
pub struct CollocationOracle {
    pub n: usize,
    pub linv_1_1: f64,
    pub linv_psi_1: f64,
    pub linv_psi_psi: f64,
    pub linv_cube_1: f64,
    pub linv_cube_psi: f64,
    pub linv_cube_cube: f64,
    pub dmatrix: DMatrix,
}

pub fn collocation_oracle(p: &WaveParams, n: usize) -> Result<CollocationOracle> {
    let lplus = assemble(OperatorKind::Lplus, p, n)?;
    let hcal = assemble(OperatorKind::Hcal, p, n)?;
    // Diagonalize P^{-1/2} L₊ P^{-1/2} with P = −∂² + γ. It has bounded norm, so the
    // near-zero eigenvalues of L₊ are not swamped by roundoff of size ε‖L₊‖.
    let gamma = 1.0 + (0..n).fold(0.0_f64, |m, i| m.max(p.c - 1.5 * p.psi(i as f64 * p.period / n as f64).powi(2) / p.c).abs());
    let half = inverse_sqrt_shifted_laplacian(n, p.period, gamma);
    let scaled = OperatorMatrix {
        kind: OperatorKind::Lplus,
        n,
        entries: &half * &lplus.entries * &half,
        period: p.period,
    };
    let (values, vectors) = symmetric_eigen(&scaled)?;
    let i0 = (0..n).min_by(|&a, &b| values[a].abs().total_cmp(&values[b].abs())).expect("nonempty");
    let apply_half = |f: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..n).map(|j| half[(i, j)] * f[j]).sum()).collect() };
    let linv = |f: &[f64]| -> Vec<f64> {
        let g = apply_half(f);
        let mut out = vec![0.0; n];
        for k in 0..n {
            if k == i0 {
                continue;
            }
            let coef: f64 = (0..n).map(|i| vectors[(i, k)] * g[i]).sum::<f64>() / values[k];
            for i in 0..n {
                out[i] += coef * vectors[(i, k)];
            }
        }
        apply_half(&out)
    };
    let h = p.period / n as f64;
    let dot = |a: &[f64], b: &[f64]| h * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let psi: Vec<f64> = (0..n).map(|j| p.psi(j as f64 * h)).collect();
    let one = vec![1.0; n];
    let cube: Vec<f64> = psi.iter().map(|v| v.powi(3)).collect();
    let u1 = linv(&one);
    let up = linv(&psi);
    let u3 = linv(&cube);
    let c = p.c;
    let e1: Vec<f64> = u1.iter().copied().chain(psi.iter().zip(&u1).map(|(s, u)| s * u / c)).collect();
    let e2: Vec<f64> = up
        .iter()
        .map(|u| u / c)
        .chain(psi.iter().zip(&up).map(|(s, u)| 1.0 / c + s * u / (c * c)))
        .collect();
    let w: Vec<f64> = u3.iter().zip(&up).map(|(a, b)| a / (2.0 * c * c) + b).collect();
    let e3: Vec<f64> = w
        .iter()
        .copied()
        .chain(psi.iter().zip(&w).map(|(s, w)| s * w / c + s * s / (2.0 * c * c)))
        .collect();
    let basis = [e1, e2, e3];
    let mut entries = [[0.0; 3]; 3];
    for i in 0..3 {
        let he = hcal.apply(&basis[i]);
        for j in 0..3 {
            entries[i][j] = dot(&he, &basis[j]);
        }
    }
    Ok(CollocationOracle {
        n,
        linv_1_1: dot(&u1, &one),
        linv_psi_1: dot(&up, &one),
        linv_psi_psi: dot(&up, &psi),
        linv_cube_1: dot(&u3, &one),
        linv_cube_psi: dot(&u3, &psi),
        linv_cube_cube: dot(&u3, &cube),
        dmatrix: DMatrix::from_entries(entries, p.kappa.value(), p.period),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hill::{classify_theta, floquet_companion};
    use crate::index::{assemble_dmatrix, index_scalars};
    use crate::wave::params_from_kappa;

    #[test]
    fn derivative_matrices_are_exact_on_trig_polynomials() {
        let n = 32;
        let l = 3.0;
        let (d1, d2) = differentiation_matrices(n, l);
        let w = 2.0 * PI / l;
        let f: Vec<f64> = (0..n).map(|j| (5.0 * w * j as f64 * l / n as f64).sin()).collect();
        for i in 0..n {
            let x = i as f64 * l / n as f64;
            let a: f64 = (0..n).map(|j| d1[(i, j)] * f[j]).sum();
            let b: f64 = (0..n).map(|j| d2[(i, j)] * f[j]).sum();
            assert!((a - 5.0 * w * (5.0 * w * x).cos()).abs() < 1e-11);
            assert!((b + 25.0 * w * w * (5.0 * w * x).sin()).abs() < 1e-10);
        }
    }

    #[test]
    fn flat_potential_spectrum() {
        let (c, l, n) = (1.5, 2.0, 128);
        let m = assemble_with_profile(OperatorKind::Lplus, c, l, &vec![0.0; n]);
        let idx = morse_index(&m, None).unwrap();
        assert_eq!((idx.n_neg, idx.n_zero), (0, 0));
        assert!((idx.eigenvalues[0] - c).abs() < 1e-10);
        let w = 2.0 * PI / l;
        assert!((idx.eigenvalues[1] - (c + w * w)).abs() < 1e-9);
    }

    #[test]
    fn operators_are_symmetric() {
        let p = params_from_kappa(2.0, 0.3).unwrap();
        for kind in [OperatorKind::Lplus, OperatorKind::Lminus, OperatorKind::Hcal] {
            let m = assemble(kind, &p, 128).unwrap();
            assert!(m.max_asymmetry() < 1e-10 * m.inf_norm());
        }
    }

    #[test]
    fn kernels_are_annihilated() {
        let p = params_from_kappa(2.0, 0.3).unwrap();
        let n = 512;
        let x = |j: usize| j as f64 * p.period / n as f64;
        let dpsi: Vec<f64> = (0..n).map(|j| p.psi_prime(x(j))).collect();
        let lp = assemble(OperatorKind::Lplus, &p, n).unwrap();
        assert!(lp.apply(&dpsi).iter().fold(0.0_f64, |m, v| m.max(v.abs())) < 1e-8);
        let kernel: Vec<f64> =
            dpsi.iter().copied().chain((0..n).map(|j| p.psi(x(j)) * p.psi_prime(x(j)) / p.c)).collect();
        let h = assemble(OperatorKind::Hcal, &p, n).unwrap();
        assert!(h.apply(&kernel).iter().fold(0.0_f64, |m, v| m.max(v.abs())) < 1e-8);
    }

    #[test]
    fn lplus_morse_index_and_kernel() {
        let p = params_from_kappa(2.0, 0.3).unwrap();
        let m = assemble(OperatorKind::Lplus, &p, 256).unwrap();
        let idx = morse_index(&m, None).unwrap();
        assert_eq!((idx.n_neg, idx.n_zero), (1, 1));
        assert!((idx.eigenvalues[0] + 10.2459).abs() < 1e-3);
        assert!((idx.eigenvalues[2] - 0.2695).abs() < 1e-3);
        let dpsi: Vec<f64> = (0..256).map(|j| p.psi_prime(j as f64 * 2.0 / 256.0)).collect();
        assert!(kernel_alignment(&m, &dpsi).unwrap() > 1.0 - 1e-6);
    }

    #[test]
    fn theta_sign_agrees_with_collocation_on_both_branches() {
        // kernel p = sin x · e^{a cos 2x} on [0, 2π] with potential p''/p
        for a in [-0.3_f64, 0.3] {
            let potential = |x: f64| {
                let gp = -2.0 * a * (2.0 * x).sin();
                -1.0 - 8.0 * a * x.cos().powi(2) + gp * gp - 4.0 * a * (2.0 * x).cos()
            };
            let kernel = |x: f64| {
                let g = (a * (2.0 * x).cos()).exp();
                let gp = -2.0 * a * (2.0 * x).sin() * g;
                (x.sin() * g, x.cos() * g + x.sin() * gp)
            };
            let p0 = kernel(0.0).1;
            let (_, dq, _, _) = floquet_companion(potential, kernel, 2.0 * PI, p0, 1e-11).unwrap();
            let predicted = classify_theta(dq / p0).unwrap();
            let grid = GridFunction::from_fn(2.0 * PI, 128, potential).unwrap();
            let idx = morse_index(&assemble_hill(&grid), Some(1e-7)).unwrap();
            assert_eq!((idx.n_neg, idx.n_zero), (predicted.n_minus, predicted.n_zero), "a = {a}");
        }
    }

    #[test]
    fn collocation_oracle_matches_quadrature() {
        let p = params_from_kappa(2.0, 0.3).unwrap();
        let o = collocation_oracle(&p, 256).unwrap();
        let s = index_scalars(&p).unwrap();
        for (a, b) in [(o.linv_1_1, s.linv_1_1), (o.linv_psi_psi, s.linv_psi_psi), (o.linv_cube_cube, s.linv_cube_cube)] {
            assert!((a - b).abs() < 1e-6 * b.abs(), "{a} vs {b}");
        }
        let d = assemble_dmatrix(&p).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let (a, b) = (o.dmatrix.entries[i][j], d.entries[i][j]);
                assert!((a - b).abs() < 1e-6 * b.abs().max(1e-3), "D[{i}][{j}] {a} vs {b}");
            }
        }
    }

    #[test]
    fn spectrum_report_reference_point() {
        let p = params_from_kappa(2.0, 0.3).unwrap();
        let d = assemble_dmatrix(&p).unwrap();
        let r = unstable_modes(&p, 256, Some(&d)).unwrap();
        assert_eq!(r.n_lplus, 1);
        assert_eq!(r.n_h, 1);
        assert_eq!(r.k_r + r.k_c, 0);
        assert_eq!(r.krein_negative, 0);
        assert!(r.symmetry_residual < 1e-7, "{}", r.symmetry_residual);
        assert_eq!(r.count_identity_measured(), Some(true));
        assert!(matches!(unstable_eigenfunction(&p, 256), Err(Error::NoUnstableMode { .. })));
    }
}
