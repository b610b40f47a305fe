//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by simulation, transformation and inference routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("Hurst parameter {h} outside admissible range [{lo}, {hi}]")]
    HurstOutOfRange { h: f64, lo: f64, hi: f64 },

    #[error("eta must lie in (0, 0.5), got {0}")]
    InvalidEta(f64),

    #[error("kernel requires 0 < s < t, got s = {s}, t = {t}")]
    KernelDomain { s: f64, t: f64 },

    #[error("time grid requires finite t_max > 0 and n >= 1, got t_max = {t_max}, n = {n}")]
    InvalidGrid { t_max: f64, n: usize },

    #[error("path has {len} values but the grid needs {expected}")]
    PathLength { len: usize, expected: usize },

    #[error("path contains a non-finite value at index {index}")]
    NonFinitePath { index: usize },

    #[error("diffusion coefficient vanished at step {index} (t = {t}, x = {x})")]
    ZeroDiffusion { index: usize, t: f64, x: f64 },

    #[error(
        "declared constant ratio {declared} violated at (t = {t}, x = {x}): drift/diffusion = {found}"
    )]
    RatioMismatch { t: f64, x: f64, found: f64, declared: f64 },

    #[error("noise factorization failed for H = {h}, n = {n}: {reason}")]
    Factorization { h: f64, n: usize, reason: String },

    #[error("increment sequence has length {len} but the grid needs {expected}")]
    IncrementLength { len: usize, expected: usize },

    #[error("degenerate design: all drift-integral increments vanish")]
    DegenerateDesign,

    #[error("chain is empty or burn-in {burn_in} >= recorded length {len}")]
    EmptyChain { burn_in: usize, len: usize },

    #[error("{0} replicate(s) failed out of {1} (first failure: {2})")]
    ReplicateFailures(usize, usize, String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
