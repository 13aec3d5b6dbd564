//! Command-line front end. Every command writes CSV with a `#`-prefixed
//! header that records all parameters and tolerances.

use crate::error::{Error, Result};
use crate::evolution::{self, random_smooth_data, SimState};
use crate::hill::{inertial_index_from_theta, integrate_hill_ivp};
use crate::index::{a_integrals, assemble_dmatrix, hamiltonian_index, AIntegrals, DMatrix, QUAD_TOL};
use crate::normal_form::{smoothing_ratios, verify_identity, TimedPolynomial, TimedTerm};
use crate::spectra::{unstable_modes, MORSE_ZERO_REL, SNAP_REL, UNSTABLE_RE_TOL};
use crate::wave::{params_from_kappa, params_from_speed, profile_residual, GridFunction, WaveParams};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::PathBuf;

/// Default `(L, κ)` rows of the θ table.
pub const THETA_TABLE_ROWS: [(f64, f64); 15] = [
    (2.0, 0.1),
    (2.0, 0.2),
    (2.0, 0.3),
    (3.0, 0.1),
    (3.0, 0.2),
    (3.0, 0.3),
    (4.0, 0.1),
    (4.0, 0.2),
    (4.0, 0.3),
    (4.0, 0.5),
    (4.0, 0.7),
    (10.0, 0.1),
    (10.0, 0.2),
    (10.0, 0.4),
    (50.0, 0.1),
];

#[derive(Debug, Parser)]
#[command(name = "dsw", version, about = "Periodic traveling waves of the DSW system: profiles, stability indices, evolution")]
pub struct Cli {
    /// Cap on worker threads for sweep commands.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct WaveSelect {
    /// Fundamental period.
    #[arg(long = "L", value_name = "L")]
    pub period: f64,
    /// Elliptic modulus.
    #[arg(long, conflicts_with = "c")]
    pub kappa: Option<f64>,
    /// Wave speed (inverted to a modulus).
    #[arg(long)]
    pub c: Option<f64>,
}

impl WaveSelect {
    pub fn params(&self) -> Result<WaveParams> {
        match (self.kappa, self.c) {
            (Some(k), None) => params_from_kappa(self.period, k),
            (None, Some(c)) => params_from_speed(self.period, c),
            _ => Err(Error::Domain("exactly one of --kappa and --c is required".into())),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Profile (ψ, φ) on a uniform grid.
    Wave {
        #[command(flatten)]
        wave: WaveSelect,
        #[arg(long, short, default_value_t = 256)]
        n: usize,
    },
    /// Floquet constant θ and inertial index per (L, κ) row.
    ThetaTable {
        /// Rows as `L:kappa` pairs, comma separated; the built-in table when absent.
        #[arg(long, value_delimiter = ',')]
        pairs: Option<Vec<String>>,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// D matrix, its index and the A-integrals over a κ grid.
    DmatrixSweep {
        #[arg(long = "L", value_name = "L", default_value_t = 1.0)]
        period: f64,
        #[arg(long, default_value_t = 0.05)]
        kappa_min: f64,
        #[arg(long, default_value_t = 0.95)]
        kappa_max: f64,
        #[arg(long, default_value_t = 0.05)]
        kappa_step: f64,
    },
    /// Eigenvalues of the linearized operator with classification and Krein signs.
    Spectrum {
        #[command(flatten)]
        wave: WaveSelect,
        #[arg(long, short, default_value_t = 256)]
        n: usize,
    },
    /// Time evolution with a conservation log.
    Simulate(SimulateArgs),
    /// Operator identity and smoothing checks of the normal-form multiplier.
    NormalformCheck {
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 32)]
        max_support: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Start from the traveling wave and evolve in its co-moving frame.
    #[arg(long, requires = "kappa", conflicts_with_all = ["zero", "random"])]
    pub wave: bool,
    /// Start from u = v = 0.
    #[arg(long, conflicts_with = "random")]
    pub zero: bool,
    /// Start from smooth random data of unit norm with this seed.
    #[arg(long)]
    pub random: Option<u64>,
    #[arg(long = "L", value_name = "L", default_value_t = 2.0)]
    pub period: f64,
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Mean added to the random v-data; removed by preprocessing.
    #[arg(long, default_value_t = 0.0)]
    pub v_mean: f64,
    #[arg(long, short, default_value_t = 256)]
    pub n: usize,
    #[arg(long = "T", value_name = "T", default_value_t = 1.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// Steps between samples.
    #[arg(long, default_value_t = 100)]
    pub sample_every: usize,
    /// Switch to the growth experiment seeded with the unstable mode at this amplitude.
    #[arg(long, requires = "wave")]
    pub perturb: Option<f64>,
    /// Write the trajectory (t, x, u, v) to this file.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    #[arg(long)]
    pub no_dealias: bool,
}

/// Parses arguments, runs the command and returns the CSV text.
pub fn run_from_args<I, T>(args: I) -> std::result::Result<String, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(CliError::Usage)?;
    let text = execute(&cli).map_err(CliError::Run)?;
    if let Some(path) = &cli.output {
        std::fs::write(path, &text).map_err(|e| CliError::Run(e.into()))?;
        return Ok(String::new());
    }
    Ok(text)
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(clap::Error),
    #[error("{0}")]
    Run(Error),
}

pub fn execute(cli: &Cli) -> Result<String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Wave { wave, n } => cmd_wave(&wave.params()?, *n),
        Command::ThetaTable { pairs, tol } => {
            let rows = match pairs {
                Some(list) => list.iter().filter(|s| !s.trim().is_empty()).map(|s| parse_pair(s)).collect::<Result<Vec<_>>>()?,
                None => THETA_TABLE_ROWS.to_vec(),
            };
            cmd_theta_table(&rows, *tol)
        }
        Command::DmatrixSweep { period, kappa_min, kappa_max, kappa_step } => {
            cmd_dmatrix_sweep(*period, &kappa_grid(*kappa_min, *kappa_max, *kappa_step)?)
        }
        Command::Spectrum { wave, n } => cmd_spectrum(&wave.params()?, *n),
        Command::Simulate(args) => cmd_simulate(args),
        Command::NormalformCheck { trials, max_support, seed } => cmd_normalform_check(*trials, *max_support, *seed),
    })
}

fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let (l, k) = s
        .split_once(':')
        .ok_or_else(|| Error::Domain(format!("row `{s}` is not of the form L:kappa")))?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| Error::Domain(format!("row `{s}`: {e}")));
    Ok((parse(l)?, parse(k)?))
}

/// Inclusive grid `min, min + step, …, max`.
pub fn kappa_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(min > 0.0 && max < 1.0 && min <= max) {
        return Err(Error::Domain(format!("κ range must satisfy 0 < min ≤ max < 1, got [{min}, {max}]")));
    }
    if !(step > 0.0) {
        return Err(Error::Domain(format!("κ step must be positive, got {step}")));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| ((min + i as f64 * step) * 1e12).round() / 1e12).collect())
}

fn header_params(out: &mut String, p: &WaveParams) {
    let fields = [
        ("L", p.period),
        ("kappa", p.kappa.value()),
        ("c", p.c),
        ("h", p.h),
        ("eta1", p.eta1),
        ("eta3", p.eta3),
        ("eta4", p.eta4),
        ("beta_sq", p.beta_sq),
        ("F1", p.f1),
        ("a", p.a),
        ("alpha", p.alpha),
        ("K", p.big_k),
    ];
    for (name, v) in fields {
        let _ = writeln!(out, "# {name} = {v}");
    }
}

pub fn cmd_wave(p: &WaveParams, n: usize) -> Result<String> {
    let (r_second, r_first) = profile_residual(p, n.max(64).next_power_of_two())?;
    let (psi, phi) = p.profile_grid(n)?;
    let mut out = String::from("# command = wave\n");
    header_params(&mut out, p);
    let _ = writeln!(out, "# n = {n}");
    let _ = writeln!(out, "# residual_second_order = {r_second}");
    let _ = writeln!(out, "# residual_first_order = {r_first}");
    out.push_str("xi,psi,phi\n");
    for j in 0..n {
        let _ = writeln!(out, "{},{},{}", psi.x(j), psi.samples()[j], phi.samples()[j]);
    }
    Ok(out)
}

pub fn cmd_theta_table(rows: &[(f64, f64)], tol: f64) -> Result<String> {
    let results: Vec<String> = rows
        .par_iter()
        .map(|&(l, k)| {
            let row = params_from_kappa(l, k).and_then(|p| integrate_hill_ivp(&p, tol)).and_then(|h| {
                let idx = inertial_index_from_theta(&h)?;
                Ok(format!(
                    "{l},{k},{},{},{},{},{},{}",
                    h.params.c, h.p_prime_0, h.q_prime_final, h.theta, idx.n_minus, idx.n_zero
                ))
            });
            row.unwrap_or_else(|e| format!("# row L = {l}, kappa = {k} failed: {e}\n{l},{k},NaN,NaN,NaN,NaN,,"))
        })
        .collect();
    let mut out = String::from("# command = theta-table\n");
    let _ = writeln!(out, "# ivp_tol = {tol}");
    out.push_str("L,kappa,c,p_prime_0,q_prime_L,theta,n_minus,n_zero\n");
    for r in results {
        out.push_str(&r);
        out.push('\n');
    }
    Ok(out)
}

/// One row of the D sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub kappa: f64,
    pub d: DMatrix,
    pub a: AIntegrals,
    pub k_ham: Option<usize>,
}

pub fn dmatrix_rows(period: f64, kappas: &[f64]) -> Vec<Result<SweepRow>> {
    kappas
        .par_iter()
        .map(|&kappa| {
            let p = params_from_kappa(period, kappa)?;
            let d = assemble_dmatrix(&p)?;
            let a = a_integrals(&p)?;
            let k_ham = hamiltonian_index(&d).ok().map(|h| h.k_ham);
            Ok(SweepRow { kappa, d, a, k_ham })
        })
        .collect()
}

pub fn cmd_dmatrix_sweep(period: f64, kappas: &[f64]) -> Result<String> {
    let mut out = String::from("# command = dmatrix-sweep\n");
    let _ = writeln!(out, "# L = {period}");
    let _ = writeln!(out, "# quadrature_tol = {QUAD_TOL}");
    let _ = writeln!(out, "# k_ham assumes n(H) = 2");
    out.push_str("kappa,d11,d12,d13,d22,d23,d33,det,n_d,k_ham,degenerate,a1,a2,a3,a4,a5,a6\n");
    for (row, &kappa) in dmatrix_rows(period, kappas).into_iter().zip(kappas) {
        match row {
            Ok(r) => {
                let e = r.d.entries;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    r.kappa,
                    e[0][0],
                    e[0][1],
                    e[0][2],
                    e[1][1],
                    e[1][2],
                    e[2][2],
                    r.d.det,
                    r.d.n_negative,
                    r.k_ham.map_or(String::new(), |k| k.to_string()),
                    r.d.is_degenerate(),
                    r.a.a1,
                    r.a.a2,
                    r.a.a3,
                    r.a.a4,
                    r.a.a5,
                    r.a.a6
                );
            }
            Err(e) => {
                let _ = writeln!(out, "# kappa = {kappa} failed: {e}");
            }
        }
    }
    Ok(out)
}

pub fn cmd_spectrum(p: &WaveParams, n: usize) -> Result<String> {
    let d = assemble_dmatrix(p)?;
    let r = unstable_modes(p, n, Some(&d))?;
    let mut out = String::from("# command = spectrum\n");
    header_params(&mut out, p);
    let _ = writeln!(out, "# n = {n}");
    let _ = writeln!(out, "# morse_zero_rel = {MORSE_ZERO_REL}");
    let _ = writeln!(out, "# unstable_re_tol = {UNSTABLE_RE_TOL}");
    let _ = writeln!(out, "# snap_rel = {SNAP_REL}");
    let _ = writeln!(out, "# zero_radius = {}", r.zero_radius);
    let _ = writeln!(out, "# n_lplus = {}", r.n_lplus);
    let _ = writeln!(out, "# n_h = {}", r.n_h);
    let _ = writeln!(out, "# n_d = {}", d.n_negative);
    let _ = writeln!(out, "# det_d = {}", d.det);
    let _ = writeln!(out, "# kernel_overlap_lplus = {}", r.kernel_overlap_lplus);
    let _ = writeln!(out, "# kernel_overlap_h = {}", r.kernel_overlap_h);
    let _ = writeln!(out, "# zero_cluster = {}", r.zero_cluster);
    let _ = writeln!(out, "# max_re = {}", r.max_re);
    let _ = writeln!(
        out,
        "# k_r={} k_c={} k_i_minus={} k_ham={}",
        r.k_r,
        r.k_c,
        r.krein_negative,
        r.k_ham()
    );
    let _ = writeln!(out, "# identity k_ham = 2 - n_d: {}", r.count_identity_fixed().unwrap_or(false));
    let _ = writeln!(out, "# identity k_ham = n_h - n_d: {}", r.count_identity_measured().unwrap_or(false));
    out.push_str("re,im,class,krein,symmetry_residual\n");
    for e in &r.eigenpairs {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            e.value.re,
            e.value.im,
            e.class.label(),
            e.krein.map_or(String::new(), |k| k.to_string()),
            e.symmetry_residual
        );
    }
    Ok(out)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<String> {
    let mut out = String::from("# command = simulate\n");
    let _ = writeln!(out, "# n = {}", args.n);
    let _ = writeln!(out, "# T = {}", args.t_end);
    let _ = writeln!(out, "# dt = {}", args.dt);
    let _ = writeln!(out, "# dealias = {}", !args.no_dealias);
    if args.wave {
        let kappa = args.kappa.ok_or_else(|| Error::Domain("--wave requires --kappa".into()))?;
        let p = params_from_kappa(args.period, kappa)?;
        header_params(&mut out, &p);
        if let Some(eps) = args.perturb {
            let fit = evolution::growth_rate_experiment(&p, eps, args.t_end, args.n, args.dt)?;
            let _ = writeln!(out, "# eps = {eps}");
            out.push_str("lambda_fit,lambda_lin,rel_err\n");
            let _ = writeln!(out, "{},{},{}", fit.lambda_fit, fit.lambda_lin, fit.rel_err);
            return Ok(out);
        }
        let (psi, phi) = p.profile_grid(args.n)?;
        let state = SimState::new(&psi, &phi, p.c)?;
        let _ = writeln!(out, "# frame_speed = {}", p.c);
        return finish_simulation(out, state, args);
    }
    let (u, v) = if args.zero {
        let z = GridFunction::from_fn(args.period, args.n, |_| 0.0)?;
        (z.clone(), z)
    } else {
        let seed = args.random.unwrap_or(0);
        let _ = writeln!(out, "# seed = {seed}");
        let (u, v) = random_smooth_data(args.period, args.n, 8, seed)?;
        (u, v.map(|x| x + args.v_mean))
    };
    let _ = writeln!(out, "# L = {}", args.period);
    let (u, v, record) = evolution::preprocess(&u, &v)?;
    let _ = writeln!(out, "# g0 = {}", record.g0);
    let _ = writeln!(out, "# shift_rule = {}", record.shift_rule);
    let state = evolution::preprocessed_state(&u, &v, &record)?;
    finish_simulation(out, state, args)
}

fn finish_simulation(mut out: String, state: SimState, args: &SimulateArgs) -> Result<String> {
    let outcome = evolution::simulate_state(state, args.t_end, args.dt, !args.no_dealias, args.sample_every)?;
    let traj = &outcome.trajectory;
    let _ = writeln!(
        out,
        "# max_drift m_u={} m_v={} e_mixed={} l2={}",
        traj.max_drift[0], traj.max_drift[1], traj.max_drift[2], traj.max_drift[3]
    );
    if let Some(path) = &args.trajectory {
        let mut body = String::from("t,x,u,v\n");
        let h = traj.period / args.n as f64;
        for s in &traj.snapshots {
            for j in 0..s.u.len() {
                let _ = writeln!(body, "{},{},{},{}", s.t, j as f64 * h, s.u[j], s.v[j]);
            }
        }
        std::fs::write(path, body)?;
    }
    out.push_str("t,m_u,m_v,e_mixed,l2\n");
    for (t, q) in &traj.log {
        let _ = writeln!(out, "{t},{},{},{},{}", q.mass_u, q.mass_v, q.energy, q.l2);
    }
    if let Some(e) = outcome.failure {
        return Err(e);
    }
    Ok(out)
}

fn random_pair(rng: &mut ChaCha8Rng, max_support: usize) -> (TimedPolynomial, TimedPolynomial) {
    let mut draw = |mean_zero: bool| {
        let support = rng.gen_range(1..=max_support.max(1));
        TimedPolynomial::new(
            (0..support)
                .map(|_| {
                    let mut k: i64 = rng.gen_range(-16..=16);
                    if mean_zero && k == 0 {
                        k = 1;
                    }
                    TimedTerm {
                        k,
                        amplitude: Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                        omega: rng.gen_range(-5.0..5.0),
                    }
                })
                .collect(),
        )
    };
    let f = draw(false);
    let g = draw(true);
    (f, g)
}

/// Residuals of the multiplier identity on random pairs.
pub fn normalform_residuals(trials: usize, max_support: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|_| {
            let (f, g) = random_pair(&mut rng, max_support);
            let t = rng.gen_range(0.0..2.0);
            verify_identity(&f, &g, t).map(|r| r.absolute)
        })
        .collect()
}

pub fn cmd_normalform_check(trials: usize, max_support: usize, seed: u64) -> Result<String> {
    let residuals = normalform_residuals(trials, max_support, seed)?;
    let k2s = [8, 16, 32, 64];
    let ratios = smoothing_ratios(1, &k2s)?;
    let mut out = String::from("# command = normalform-check\n");
    let _ = writeln!(out, "# seed = {seed}");
    let _ = writeln!(out, "# max_support = {max_support}");
    let _ = writeln!(out, "# max_residual = {}", residuals.iter().fold(0.0_f64, |m, &r| m.max(r)));
    let _ = writeln!(
        out,
        "# smoothing_ratios k2 = 8/16/32/64: {}",
        ratios.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(" ")
    );
    out.push_str("trial,residual\n");
    for (i, r) in residuals.iter().enumerate() {
        let _ = writeln!(out, "{i},{r}");
    }
    Ok(out)
}
