use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("speed c = {c} is at or below the threshold 4π²/L² = {threshold}; no wave of this period exists")]
    BelowThreshold { c: f64, threshold: f64 },
    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure { t: f64, reason: String },
    #[error("theta = {0:e} is too close to zero to classify the kernel")]
    DegenerateTheta(f64),
    #[error("matrix D is degenerate: det = {det:e}, scale = {scale:e}")]
    DegenerateD { det: f64, scale: f64 },
    #[error("inconsistent index: {0}")]
    InconsistentIndex(String),
    #[error("input is not even: asymmetry {0:e}")]
    Symmetry(f64),
    #[error("second argument has nonzero mean coefficient {0:e}")]
    MeanZero(f64),
    #[error("solution blew up; last finite time t = {t}")]
    BlowUp { t: f64 },
    #[error("deviation left the linear regime at t = {t} before the fit window closed")]
    WindowTooShort { t: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("no unstable eigenvalue found (largest real part {max_re:e})")]
    NoUnstableMode { max_re: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
