//! Pseudospectral exponential time-differencing RK4 for
//! `u_t + (uv)_x + u_xxx = 0`, `v_t + u u_x = 0`, optionally in a moving frame.
//!
//! The linear part treated exactly is the constant-coefficient operator:
//! dispersion, frame drift, and the linearization about the conserved means
//! `(ū, v̄)`. Only products of the mean-free parts are explicit.

use crate::error::{Error, Result};
use crate::fourier::mode_index;
use crate::spectra::unstable_eigenfunction;
use crate::wave::{conserved_quantities, Conserved, GridFunction, WaveParams};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

/// Physical amplitude beyond which the run is declared blown up.
pub const BLOW_UP: f64 = 1e12;

/// State in a frame moving with speed `frame_speed`; the physical `v` is the
/// stored field plus the constant `v_background`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub u_hat: Vec<Complex64>,
    pub v_hat: Vec<Complex64>,
    pub frame_speed: f64,
    pub v_background: f64,
    pub period: f64,
}

impl SimState {
    pub fn new(u: &GridFunction, v: &GridFunction, frame_speed: f64) -> Result<Self> {
        Self::with_background(u, v, frame_speed, 0.0)
    }

    pub fn with_background(u: &GridFunction, v: &GridFunction, frame_speed: f64, v_background: f64) -> Result<Self> {
        if !u.same_grid(v) {
            return Err(Error::Shape("u and v must share a grid".into()));
        }
        let n = u.len();
        let mut u_hat = crate::fourier::forward(u.samples());
        let mut v_hat = crate::fourier::forward(v.samples());
        u_hat[n / 2] = Complex64::new(0.0, 0.0);
        v_hat[n / 2] = Complex64::new(0.0, 0.0);
        Ok(Self { t: 0.0, u_hat, v_hat, frame_speed, v_background, period: u.period() })
    }

    pub fn n(&self) -> usize {
        self.u_hat.len()
    }

    /// `(u, v)` in frame coordinates, background included.
    pub fn fields(&self) -> (GridFunction, GridFunction) {
        let u = crate::fourier::inverse_real(&self.u_hat);
        let g = self.v_background;
        let v = crate::fourier::inverse_real(&self.v_hat).into_iter().map(|x| x + g).collect();
        (
            GridFunction::new(self.period, u).expect("state grid is valid"),
            GridFunction::new(self.period, v).expect("state grid is valid"),
        )
    }

    /// Fields in the laboratory frame: `u(x) = U(x − s t)`.
    pub fn lab_fields(&self) -> (GridFunction, GridFunction) {
        let shifted = |hat: &[Complex64]| -> Vec<Complex64> {
            let n = hat.len();
            hat.iter()
                .enumerate()
                .map(|(j, z)| {
                    let k = 2.0 * PI / self.period * mode_index(j, n) as f64;
                    z * Complex64::from_polar(1.0, -k * self.frame_speed * self.t)
                })
                .collect()
        };
        let moved = SimState {
            u_hat: shifted(&self.u_hat),
            v_hat: shifted(&self.v_hat),
            ..self.clone()
        };
        moved.fields()
    }

    /// Largest deviation from Hermitian symmetry, relative to the largest coefficient.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.n();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = f64::MIN_POSITIVE;
        for hat in [&self.u_hat, &self.v_hat] {
            for j in 1..n {
                worst = worst.max((hat[j] - hat[n - j].conj()).norm());
                scale = scale.max(hat[j].norm());
            }
            worst = worst.max(hat[0].im.abs());
        }
        worst / scale
    }
}

/// Result of removing the mean of `v₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessRecord {
    pub g0: f64,
    pub shift_rule: String,
}

/// Removes `g₀ = mean(v₀)`. The reduced system is evolved in the frame moving
/// with `g₀`, where `u` obeys the original equation and `v` gains `+g₀ v_x`.
pub fn preprocess(u0: &GridFunction, v0: &GridFunction) -> Result<(GridFunction, GridFunction, PreprocessRecord)> {
    if !u0.same_grid(v0) {
        return Err(Error::Shape("u0 and v0 must share a grid".into()));
    }
    let g0 = v0.integral() / v0.period();
    let v = v0.map(|x| x - g0);
    let record = PreprocessRecord {
        g0,
        shift_rule: format!("u(x,t) = U(x - {g0}*t, t); v(x,t) = V(x - {g0}*t, t) + {g0}"),
    };
    Ok((u0.clone(), v, record))
}

/// Initial state for preprocessed data.
pub fn preprocessed_state(u: &GridFunction, v: &GridFunction, record: &PreprocessRecord) -> Result<SimState> {
    let mut s = SimState::with_background(u, v, record.g0, record.g0)?;
    // the stored v is mean-free; the background carries g₀
    s.v_hat[0] = Complex64::new(0.0, 0.0);
    Ok(s)
}

/// Inverse of [`preprocess`] applied to an evolved state.
pub fn postprocess(state: &SimState) -> (GridFunction, GridFunction) {
    state.lab_fields()
}

/// Time stepper with cached transforms.
pub struct Stepper {
    n: usize,
    padded: usize,
    dealias: bool,
    k: Vec<f64>,
    cache: Mutex<Option<([f64; 4], EtdCoefficients)>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    fwd_pad: Arc<dyn Fft<f64>>,
    inv_pad: Arc<dyn Fft<f64>>,
}

impl Stepper {
    pub fn new(n: usize, period: f64, dealias: bool) -> Self {
        let padded = 3 * n / 2;
        let mut planner = FftPlanner::new();
        Self {
            n,
            padded,
            dealias,
            k: (0..n)
                .map(|j| if j == n / 2 { 0.0 } else { 2.0 * PI / period * mode_index(j, n) as f64 })
                .collect(),
            cache: Mutex::new(None),
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            fwd_pad: planner.plan_fft_forward(padded),
            inv_pad: planner.plan_fft_inverse(padded),
        }
    }

    fn to_physical(&self, hat: &[Complex64]) -> Vec<f64> {
        let n = self.n;
        if self.dealias {
            let m = self.padded;
            let mut buf = vec![Complex64::new(0.0, 0.0); m];
            for j in 0..n {
                let k = mode_index(j, n);
                if k.unsigned_abs() as usize >= n / 2 {
                    continue;
                }
                let slot = if k >= 0 { k as usize } else { (m as i64 + k) as usize };
                buf[slot] = hat[j];
            }
            self.inv_pad.process(&mut buf);
            buf.iter().map(|z| z.re / n as f64).collect()
        } else {
            let mut buf = hat.to_vec();
            self.inv.process(&mut buf);
            buf.iter().map(|z| z.re / n as f64).collect()
        }
    }

    fn to_spectral(&self, values: &[f64]) -> Vec<Complex64> {
        let n = self.n;
        let mut buf: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        if self.dealias {
            let m = self.padded;
            self.fwd_pad.process(&mut buf);
            let scale = n as f64 / m as f64;
            (0..n)
                .map(|j| {
                    let k = mode_index(j, n);
                    if k.unsigned_abs() as usize >= n / 2 {
                        return Complex64::new(0.0, 0.0);
                    }
                    let slot = if k >= 0 { k as usize } else { (m as i64 + k) as usize };
                    buf[slot] * scale
                })
                .collect()
        } else {
            self.fwd.process(&mut buf);
            buf[n / 2] = Complex64::new(0.0, 0.0);
            buf
        }
    }

    /// Explicit part `(−∂(ũ ṽ), −∂(ũ²/2))` for the deviations from the means.
    fn nonlinear(&self, u_hat: &[Complex64], v_hat: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let strip = |hat: &[Complex64]| -> Vec<Complex64> {
            let mut h = hat.to_vec();
            h[0] = Complex64::new(0.0, 0.0);
            h
        };
        let u = self.to_physical(&strip(u_hat));
        let v = self.to_physical(&strip(v_hat));
        let uv: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a * b).collect();
        let uu: Vec<f64> = u.iter().map(|a| 0.5 * a * a).collect();
        let mut nu = self.to_spectral(&uv);
        let mut nv = self.to_spectral(&uu);
        for j in 0..self.n {
            let ik = Complex64::new(0.0, -self.k[j]);
            nu[j] *= ik;
            nv[j] *= ik;
        }
        (nu, nv)
    }

    /// ETDRK4 coefficients for the constant-coefficient part linearized about
    /// the conserved means `(ū, v̄)`: `M_k = i [[k³ + (s − v̄)k, −ūk], [−ūk, sk]]`.
    fn coefficients(&self, s: &SimState, h: f64) -> EtdCoefficients {
        let n = self.n as f64;
        let u_bar = s.u_hat[0].re / n;
        let v_bar = s.v_hat[0].re / n + s.v_background;
        let key = [h, u_bar, v_bar, s.frame_speed];
        let mut cache = self.cache.lock().expect("coefficient cache poisoned");
        if let Some((k, c)) = cache.as_ref() {
            if *k == key {
                return c.clone();
            }
        }
        let mut c = EtdCoefficients::default();
        let at = |l: f64, scale: f64| phi_functions(Complex64::new(0.0, scale * l * h));
        for &k in &self.k {
            let a = k * k * k + (s.frame_speed - v_bar) * k;
            let b = -u_bar * k;
            let d = s.frame_speed * k;
            c.e_half.push(spectral_block(a, b, d, |l| Complex64::new(0.0, 0.5 * l * h).exp()));
            c.e_full.push(spectral_block(a, b, d, |l| Complex64::new(0.0, l * h).exp()));
            c.q.push(spectral_block(a, b, d, |l| 0.5 * h * at(l, 0.5)[0]));
            c.f1.push(spectral_block(a, b, d, |l| {
                let p = at(l, 1.0);
                h * (p[0] - 3.0 * p[1] + 4.0 * p[2])
            }));
            c.f2.push(spectral_block(a, b, d, |l| {
                let p = at(l, 1.0);
                h * (p[1] - 2.0 * p[2])
            }));
            c.f3.push(spectral_block(a, b, d, |l| {
                let p = at(l, 1.0);
                h * (4.0 * p[2] - p[1])
            }));
        }
        *cache = Some((key, c.clone()));
        c
    }

    /// One exponential time-differencing RK4 step.
    pub fn step(&self, s: &SimState, dt: f64) -> Result<SimState> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        if s.n() != self.n {
            return Err(Error::Shape(format!("stepper built for {} modes, state has {}", self.n, s.n())));
        }
        let n = self.n;
        let c = self.coefficients(s, dt);
        let lin = |terms: &[(&[Block], &Pair)]| -> Pair {
            let mut out: Pair = (vec![Complex64::new(0.0, 0.0); n], vec![Complex64::new(0.0, 0.0); n]);
            for (e, x) in terms {
                for j in 0..n {
                    let (du, dv) = e[j].apply(x.0[j], x.1[j]);
                    out.0[j] += du;
                    out.1[j] += dv;
                }
            }
            out
        };
        let combine = |x: &Pair, y: &Pair, alpha: f64, beta: f64| -> Pair {
            (
                (0..n).map(|j| alpha * x.0[j] + beta * y.0[j]).collect(),
                (0..n).map(|j| alpha * x.1[j] + beta * y.1[j]).collect(),
            )
        };

        let u: Pair = (s.u_hat.clone(), s.v_hat.clone());
        let nu = self.nonlinear(&u.0, &u.1);
        let a = lin(&[(&c.e_half, &u), (&c.q, &nu)]);
        let na = self.nonlinear(&a.0, &a.1);
        let b = lin(&[(&c.e_half, &u), (&c.q, &na)]);
        let nb = self.nonlinear(&b.0, &b.1);
        let cc = lin(&[(&c.e_half, &a), (&c.q, &combine(&nb, &nu, 2.0, -1.0))]);
        let nc = self.nonlinear(&cc.0, &cc.1);
        let (u_hat, v_hat) = lin(&[
            (&c.e_full, &u),
            (&c.f1, &nu),
            (&c.f2, &combine(&na, &nb, 2.0, 2.0)),
            (&c.f3, &nc),
        ]);
        let t = s.t + dt;
        let limit = BLOW_UP * n as f64;
        if u_hat.iter().chain(&v_hat).any(|z| !z.re.is_finite() || !z.im.is_finite() || z.norm() > limit) {
            return Err(Error::BlowUp { t: s.t });
        }
        Ok(SimState { t, u_hat, v_hat, ..s.clone() })
    }
}

type Pair = (Vec<Complex64>, Vec<Complex64>);

/// Per-mode matrix functions used by one step.
#[derive(Debug, Clone, Default)]
struct EtdCoefficients {
    e_half: Vec<Block>,
    e_full: Vec<Block>,
    q: Vec<Block>,
    f1: Vec<Block>,
    f2: Vec<Block>,
    f3: Vec<Block>,
}

/// `[φ₁(z), φ₂(z), φ₃(z)]` with `φ_k(z) = Σ zⁿ/(n+k)!`; the series is used
/// for `|z| < 1` where the closed forms cancel.
fn phi_functions(z: Complex64) -> [Complex64; 3] {
    if z.norm() < 1.0 {
        phi_series(z)
    } else {
        phi_closed(z)
    }
}

fn phi_series(z: Complex64) -> [Complex64; 3] {
    {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (k, slot) in out.iter_mut().enumerate() {
            let mut term = Complex64::new(1.0, 0.0);
            for j in 1..=(k + 1) {
                term /= j as f64;
            }
            let mut sum = term;
            for m in 1..30 {
                term *= z / (m + k + 1) as f64;
                sum += term;
            }
            *slot = sum;
        }
        out
    }
}

fn phi_closed(z: Complex64) -> [Complex64; 3] {
    let e = z.exp();
    let p1 = (e - 1.0) / z;
    let p2 = (e - 1.0 - z) / (z * z);
    let p3 = (e - 1.0 - z - 0.5 * z * z) / (z * z * z);
    [p1, p2, p3]
}

/// A 2×2 complex matrix acting on the `(û_k, v̂_k)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Block([[Complex64; 2]; 2]);

impl Block {
    fn apply(&self, u: Complex64, v: Complex64) -> (Complex64, Complex64) {
        let m = &self.0;
        (m[0][0] * u + m[0][1] * v, m[1][0] * u + m[1][1] * v)
    }

    #[cfg(test)]
    fn compose(&self, other: &Block) -> Block {
        let (a, b) = (&self.0, &other.0);
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Block(out)
    }
}

/// `f(S)` for the real symmetric `S = [[a, b], [b, d]]` via spectral projectors,
/// with the small eigenvalue taken from the determinant to avoid cancellation.
fn spectral_block(a: f64, b: f64, d: f64, f: impl Fn(f64) -> Complex64) -> Block {
    let zero = Complex64::new(0.0, 0.0);
    let m = 0.5 * (a + d);
    let r = (0.5 * (a - d)).hypot(b);
    if r <= 1e-14 * m.abs() || r == 0.0 {
        let e = f(m);
        return Block([[e, zero], [zero, e]]);
    }
    let big = if m >= 0.0 { m + r } else { m - r };
    let small = (a * d - b * b) / big;
    let (e1, e2) = (f(big), f(small));
    let gap = big - small;
    // P_big = (S − small·I)/gap, P_small = I − P_big
    let p = [[(a - small) / gap, b / gap], [b / gap, (d - small) / gap]];
    let mut out = [[zero; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let id = if i == j { 1.0 } else { 0.0 };
            out[i][j] = e1 * p[i][j] + e2 * (id - p[i][j]);
        }
    }
    Block(out)
}

/// One step with a freshly built stepper.
pub fn step(s: &SimState, dt: f64) -> Result<SimState> {
    Stepper::new(s.n(), s.period, true).step(s, dt)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    /// Lab-frame fields.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub period: f64,
    pub snapshots: Vec<Snapshot>,
    pub log: Vec<(f64, Conserved)>,
    /// Largest `|Q(t) − Q(0)| / max(|Q(0)|, 1)` for the four quantities.
    pub max_drift: [f64; 4],
    pub final_state: SimState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub dealias: bool,
    /// Snapshot and conservation sampling interval in steps (0 keeps only the ends).
    pub sample_every: usize,
    pub frame_speed: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { dealias: true, sample_every: 0, frame_speed: 0.0 }
    }
}

/// Outcome of [`simulate_state`]; on blow-up the trajectory holds everything up to the failure.
#[derive(Debug)]
pub struct SimOutcome {
    pub trajectory: Trajectory,
    pub failure: Option<Error>,
}

/// Evolves an existing state to `t_end` with fixed steps of (at most) `dt`.
pub fn simulate_state(state: SimState, t_end: f64, dt: f64, dealias: bool, sample_every: usize) -> Result<SimOutcome> {
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::Domain(format!("final time must be nonnegative, got {t_end}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    let steps = (t_end / dt).round().max(if t_end > 0.0 { 1.0 } else { 0.0 }) as usize;
    let h = if steps > 0 { t_end / steps as f64 } else { 0.0 };
    let stepper = Stepper::new(state.n(), state.period, dealias);
    let record = |s: &SimState| -> Result<(Snapshot, (f64, Conserved))> {
        let (u, v) = s.lab_fields();
        let q = conserved_quantities(&u, &v)?;
        Ok((Snapshot { t: s.t, u: u.into_samples(), v: v.into_samples() }, (s.t, q)))
    };
    let (snap0, log0) = record(&state)?;
    let q0 = log0.1.as_array();
    let mut traj = Trajectory {
        period: state.period,
        snapshots: vec![snap0],
        log: vec![log0],
        max_drift: [0.0; 4],
        final_state: state.clone(),
    };
    let mut current = state;
    for i in 1..=steps {
        match stepper.step(&current, h) {
            Ok(next) => current = next,
            Err(e) => {
                traj.final_state = current;
                return Ok(SimOutcome { trajectory: traj, failure: Some(e) });
            }
        }
        if i == steps || (sample_every > 0 && i % sample_every == 0) {
            let (snap, entry) = record(&current)?;
            for (d, (q, q0)) in traj.max_drift.iter_mut().zip(entry.1.as_array().iter().zip(q0)) {
                *d = d.max((q - q0).abs() / q0.abs().max(1.0));
            }
            traj.snapshots.push(snap);
            traj.log.push(entry);
        }
    }
    traj.final_state = current;
    Ok(SimOutcome { trajectory: traj, failure: None })
}

/// Simulates from lab-frame data; blow-up is returned as an error.
pub fn simulate(u0: &GridFunction, v0: &GridFunction, t_end: f64, dt: f64, opts: SimOptions) -> Result<Trajectory> {
    let state = SimState::new(u0, v0, opts.frame_speed)?;
    let out = simulate_state(state, t_end, dt, opts.dealias, opts.sample_every)?;
    match out.failure {
        Some(e) => Err(e),
        None => Ok(out.trajectory),
    }
}

/// Smooth random data built from modes `1..=max_mode` with decaying amplitudes,
/// scaled so that `∫(u² + v²) = 1`.
pub fn random_smooth_data(period: f64, n: usize, max_mode: usize, seed: u64) -> Result<(GridFunction, GridFunction)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<(f64, f64)> {
        (1..=max_mode)
            .map(|m| {
                let amp = rng.gen_range(-1.0..1.0) / (m * m) as f64;
                (amp, rng.gen_range(0.0..2.0 * PI))
            })
            .collect()
    };
    let cu = draw(&mut rng);
    let cv = draw(&mut rng);
    let eval = |coef: &[(f64, f64)], x: f64| -> f64 {
        coef.iter()
            .enumerate()
            .map(|(i, (a, ph))| a * (2.0 * PI * (i + 1) as f64 * x / period + ph).cos())
            .sum()
    };
    let u = GridFunction::from_fn(period, n, |x| eval(&cu, x))?;
    let v = GridFunction::from_fn(period, n, |x| eval(&cv, x))?;
    let norm = (u.dot(&u) + v.dot(&v)).sqrt();
    Ok((u.map(|x| x / norm), v.map(|x| x / norm)))
}

/// Linear-versus-nonlinear growth comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthFit {
    pub lambda_fit: f64,
    pub lambda_lin: f64,
    pub rel_err: f64,
    pub initial_deviation: f64,
}

/// `‖(u − ψ, v − φ)‖_{L²}` on the grid.
fn deviation(state: &SimState, psi: &GridFunction, phi: &GridFunction) -> f64 {
    let (u, v) = state.fields();
    let h = u.spacing();
    let s: f64 = (0..u.len())
        .map(|j| (u.samples()[j] - psi.samples()[j]).powi(2) + (v.samples()[j] - phi.samples()[j]).powi(2))
        .sum();
    (h * s).sqrt()
}

/// Seeds the wave with `eps` times its unstable eigenfunction, evolves in the
/// co-moving frame and fits the exponential growth rate of the deviation.
pub fn growth_rate_experiment(p: &WaveParams, eps: f64, t_end: f64, n: usize, dt: f64) -> Result<GrowthFit> {
    if !(1e-8..=1e-3).contains(&eps) {
        return Err(Error::Domain(format!("perturbation amplitude must lie in [1e-8, 1e-3], got {eps}")));
    }
    let (lambda_lin, u_mode, v_mode) = unstable_eigenfunction(p, n)?;
    let (psi, phi) = p.profile_grid(n)?;
    let h = p.period / n as f64;
    let norm = (h * u_mode.iter().chain(&v_mode).map(|x| x * x).sum::<f64>()).sqrt();
    let u0 = GridFunction::new(p.period, (0..n).map(|j| psi.samples()[j] + eps * u_mode[j] / norm).collect())?;
    let v0 = GridFunction::new(p.period, (0..n).map(|j| phi.samples()[j] + eps * v_mode[j] / norm).collect())?;
    let stepper = Stepper::new(n, p.period, true);
    let mut state = SimState::new(&u0, &v0, p.c)?;
    let initial_deviation = deviation(&state, &psi, &phi);
    let steps = (t_end / dt).round() as usize;
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push((0.0, initial_deviation));
    for _ in 0..steps {
        state = stepper.step(&state, dt)?;
        let d = deviation(&state, &psi, &phi);
        if d > 1e-2 {
            return Err(Error::WindowTooShort { t: state.t });
        }
        samples.push((state.t, d));
    }
    let window: Vec<(f64, f64)> = samples.iter().filter(|(t, _)| *t >= 0.25 * t_end).map(|&(t, d)| (t, d.ln())).collect();
    let lambda_fit = least_squares_slope(&window);
    Ok(GrowthFit { lambda_fit, lambda_lin, rel_err: (lambda_fit - lambda_lin).abs() / lambda_lin, initial_deviation })
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let m = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = points
        .iter()
        .fold((0.0, 0.0), |(n, d), (x, y)| (n + (x - mx) * (y - my), d + (x - mx).powi(2)));
    num / den
}

/// Deviation history `(t, ‖(u − ψ, v − φ)‖)` for a random smooth perturbation of size `eps`.
pub fn perturbation_history(
    p: &WaveParams,
    eps: f64,
    t_end: f64,
    n: usize,
    dt: f64,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    let (psi, phi) = p.profile_grid(n)?;
    let (du, dv) = random_smooth_data(p.period, n, 6, seed)?;
    let u0 = GridFunction::new(p.period, (0..n).map(|j| psi.samples()[j] + eps * du.samples()[j]).collect())?;
    let v0 = GridFunction::new(p.period, (0..n).map(|j| phi.samples()[j] + eps * dv.samples()[j]).collect())?;
    let stepper = Stepper::new(n, p.period, true);
    let mut state = SimState::new(&u0, &v0, p.c)?;
    let mut out = vec![(0.0, deviation(&state, &psi, &phi))];
    let steps = (t_end / dt).round() as usize;
    let every = (steps / 50).max(1);
    for i in 1..=steps {
        state = stepper.step(&state, dt)?;
        if i % every == 0 || i == steps {
            out.push((state.t, deviation(&state, &psi, &phi)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wave::params_from_kappa;

    fn grid(l: f64, n: usize, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction::from_fn(l, n, f).unwrap()
    }

    #[test]
    fn zero_state_stays_zero() {
        let z = grid(2.0, 64, |_| 0.0);
        let traj = simulate(&z, &z, 1.0, 1e-2, SimOptions::default()).unwrap();
        assert!(traj.final_state.u_hat.iter().chain(&traj.final_state.v_hat).all(|c| c.norm() == 0.0));
    }

    #[test]
    fn airy_phases_in_linear_regime() {
        let l = 2.0 * PI;
        let n = 64;
        let u = grid(l, n, |x| 1e-9 * ((3.0 * x).cos() + (5.0 * x).sin()));
        let v = grid(l, n, |_| 0.0);
        let s0 = SimState::new(&u, &v, 0.0).unwrap();
        let traj = simulate_state(s0.clone(), 1.0, 1e-3, true, 0).unwrap().trajectory;
        let s1 = traj.final_state;
        for j in 0..n {
            let k = mode_index(j, n) as f64;
            if j == n / 2 {
                continue;
            }
            let expected = s0.u_hat[j] * Complex64::from_polar(1.0, k.powi(3) * 1.0);
            assert!((s1.u_hat[j] - expected).norm() < 1e-10 * (1e-9 * n as f64), "mode {k}");
        }
    }

    #[test]
    fn traveling_wave_is_stationary_in_moving_frame() {
        let p = params_from_kappa(2.0, 0.3).unwrap();
        let (psi, phi) = p.profile_grid(256).unwrap();
        let opts = SimOptions { frame_speed: p.c, ..SimOptions::default() };
        let traj = simulate(&psi, &phi, 5.0, 1e-3, opts).unwrap();
        let (u, _) = traj.final_state.fields();
        let err = (0..256).fold(0.0_f64, |m, j| m.max((u.samples()[j] - psi.samples()[j]).abs()));
        assert!(err < 1e-6, "deviation {err}");
        assert!(traj.max_drift.iter().all(|&d| d < 1e-9), "{:?}", traj.max_drift);
    }

    #[test]
    fn constants_are_preserved() {
        let l = 3.0;
        let u = grid(l, 32, |_| 0.7);
        let v = grid(l, 32, |_| 3.0);
        let (u1, v1, rec) = preprocess(&u, &v).unwrap();
        assert!((rec.g0 - 3.0).abs() < 1e-14);
        assert!(v1.sup_norm() < 1e-14);
        let s = preprocessed_state(&u1, &v1, &rec).unwrap();
        let out = simulate_state(s, 1.0, 1e-2, true, 0).unwrap().trajectory;
        let (ul, vl) = postprocess(&out.final_state);
        assert!(ul.samples().iter().all(|x| (x - 0.7).abs() < 1e-12));
        assert!(vl.samples().iter().all(|x| (x - 3.0).abs() < 1e-12));
    }

    #[test]
    fn preprocess_identity_for_mean_free_v() {
        let l = 2.0;
        let u = grid(l, 32, |x| (PI * x).sin());
        let v = grid(l, 32, |x| (PI * x).cos());
        let (u1, v1, rec) = preprocess(&u, &v).unwrap();
        assert!(rec.g0.abs() < 1e-15);
        assert_eq!(u1, u);
        assert!((0..32).all(|j| (v1.samples()[j] - v.samples()[j]).abs() < 1e-15));
    }

    #[test]
    fn preprocess_roundtrip_matches_direct_run() {
        let l = 2.0 * PI;
        let n = 64;
        let (u, w) = random_smooth_data(l, n, 4, 7).unwrap();
        let v = w.map(|x| x + 0.8);
        let direct = simulate(&u, &v, 0.5, 1e-3, SimOptions::default()).unwrap();
        let (u1, v1, rec) = preprocess(&u, &v).unwrap();
        let reduced = simulate_state(preprocessed_state(&u1, &v1, &rec).unwrap(), 0.5, 1e-3, true, 0)
            .unwrap()
            .trajectory;
        let (ul, vl) = postprocess(&reduced.final_state);
        let (ud, vd) = direct.final_state.lab_fields();
        for j in 0..n {
            assert!((ul.samples()[j] - ud.samples()[j]).abs() < 1e-8);
            assert!((vl.samples()[j] - vd.samples()[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn frame_equivalence() {
        let l = 2.0 * PI;
        let n = 64;
        let (u, v) = random_smooth_data(l, n, 4, 11).unwrap();
        let lab = simulate(&u, &v, 0.5, 1e-3, SimOptions::default()).unwrap();
        let moving = simulate(&u, &v, 0.5, 1e-3, SimOptions { frame_speed: 1.3, ..SimOptions::default() }).unwrap();
        let (ua, va) = lab.final_state.lab_fields();
        let (ub, vb) = moving.final_state.lab_fields();
        for j in 0..n {
            assert!((ua.samples()[j] - ub.samples()[j]).abs() < 1e-7);
            assert!((va.samples()[j] - vb.samples()[j]).abs() < 1e-7);
        }
    }

    #[test]
    fn hermitian_symmetry_kept() {
        let (u, v) = random_smooth_data(2.0 * PI, 64, 5, 3).unwrap();
        let traj = simulate(&u, &v, 0.3, 1e-3, SimOptions::default()).unwrap();
        assert!(traj.final_state.hermitian_defect() < 1e-12);
    }

    #[test]
    fn v_mass_exact() {
        let (u, v) = random_smooth_data(2.0 * PI, 64, 5, 5).unwrap();
        let traj = simulate(&u, &v, 1.0, 1e-3, SimOptions::default()).unwrap();
        assert!(traj.max_drift[1] < 1e-13);
        assert!(traj.final_state.v_hat[0].norm() < 1e-12 * 64.0);
    }

    #[test]
    fn dealiasing_slows_quadratic_drift() {
        let l = 2.0 * PI;
        let n = 32;
        let (u, v) = random_smooth_data(l, n, 12, 2).unwrap();
        let (u, v) = (u.map(|x| 3.0 * x), v.map(|x| 3.0 * x));
        let on = simulate(&u, &v, 0.2, 1e-4, SimOptions::default()).unwrap();
        let off = simulate(&u, &v, 0.2, 1e-4, SimOptions { dealias: false, ..SimOptions::default() }).unwrap();
        assert!(off.max_drift[3] > on.max_drift[3], "on {:?} off {:?}", on.max_drift, off.max_drift);
    }

    #[test]
    fn no_unstable_mode_reported() {
        let p = params_from_kappa(2.0, 0.3).unwrap();
        assert!(matches!(growth_rate_experiment(&p, 1e-6, 1.0, 256, 1e-3), Err(Error::NoUnstableMode { .. })));
        assert!(matches!(growth_rate_experiment(&p, 1e-1, 1.0, 256, 1e-3), Err(Error::Domain(_))));
    }

    #[test]
    fn block_exponential_matches_series() {
        for &(a, b, d, tau) in &[(3.0, 0.5, -1.0, 0.7), (1e3, 2.0, 40.0, 1e-3), (0.0, 0.0, 0.0, 1.0), (2.0, 1.0, 2.0, 0.3)] {
            let e = spectral_block(a, b, d, |l| Complex64::new(0.0, l * tau).exp());
            // scaling and squaring of the Taylor series of exp(iτS)
            let steps = 20;
            let h = tau / f64::from(1u32 << steps);
            let i = Complex64::new(0.0, 1.0);
            let s = [[i * a * h, i * b * h], [i * b * h, i * d * h]];
            let mut term = [[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)], [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]];
            let mut sum = term;
            for n in 1..8 {
                let mut next = [[Complex64::new(0.0, 0.0); 2]; 2];
                for r in 0..2 {
                    for c in 0..2 {
                        next[r][c] = (term[r][0] * s[0][c] + term[r][1] * s[1][c]) / n as f64;
                    }
                }
                term = next;
                for r in 0..2 {
                    for c in 0..2 {
                        sum[r][c] += term[r][c];
                    }
                }
            }
            let mut m = Block(sum);
            for _ in 0..steps {
                m = m.compose(&m);
            }
            for r in 0..2 {
                for c in 0..2 {
                    assert!((m.0[r][c] - e.0[r][c]).norm() < 1e-9, "{a} {b} {d}: {:?} vs {:?}", m.0, e.0);
                }
            }
        }
    }

    #[test]
    fn phi_functions_branches_agree() {
        for &y in &[1.0, -1.0, 0.5, 2.0] {
            let z = Complex64::new(0.0, y);
            let (series, closed) = (phi_series(z), phi_closed(z));
            for k in 0..3 {
                assert!((series[k] - closed[k]).norm() < 1e-13 / (y * y).min(1.0), "{y} {k}");
            }
        }
        let p = phi_functions(Complex64::new(0.0, 0.0));
        assert_eq!(p, [Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0), Complex64::new(1.0 / 6.0, 0.0)]);
    }

    #[test]
    fn fourth_order_in_time() {
        let l = 2.0 * PI;
        let (u, v) = random_smooth_data(l, 64, 4, 9).unwrap();
        let run = |dt: f64| simulate(&u, &v, 0.5, dt, SimOptions::default()).unwrap().final_state;
        let reference = run(1.25e-4);
        let err = |s: SimState| {
            s.u_hat.iter().zip(&reference.u_hat).fold(0.0_f64, |m, (a, b)| m.max((a - b).norm())) / 64.0
        };
        let (e1, e2) = (err(run(2e-3)), err(run(1e-3)));
        let order = (e1 / e2).log2();
        assert!((3.5..4.6).contains(&order), "order {order} ({e1}, {e2})");
    }

    #[test]
    fn slope_fit() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 2.0 + 0.5 * i as f64)).collect();
        assert!((least_squares_slope(&pts) - 0.5).abs() < 1e-14);
    }
}
