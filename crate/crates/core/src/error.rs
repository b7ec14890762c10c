use thiserror::Error;

/// Errors raised by the pulse-synthesis toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid system parameters: {0}")]
    InvalidParams(String),

    #[error("rotation angle |theta| = {0} exceeds 2*pi")]
    AngleTooLarge(f64),

    #[error("time {t} ns outside pulse window [0, {tg}] ns")]
    OutOfWindow { t: f64, tg: f64 },

    #[error("degenerate pulse shape: finite Fourier integral {value:e} below threshold {threshold:e}")]
    DegenerateShape { value: f64, threshold: f64 },

    #[error("normalized gate time {0} is at or below the WahWah speed limit 3/4")]
    BelowSpeedLimit(f64),

    #[error("Hamiltonian sample at t = {t} ns is not Hermitian (deviation {deviation:e})")]
    NotHermitian { t: f64, deviation: f64 },

    #[error("invalid propagation grid: {0}")]
    InvalidGrid(String),

    #[error("invalid optimizer configuration: {0}")]
    InvalidOptimizer(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
