//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("matrix is not square or entries are not finite: {0}")]
    InvalidMatrix(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("dominant eigenvalue is repeated or tied in magnitude (gap ratio {gap_ratio:.3e})")]
    NonSimpleDominant { gap_ratio: f64 },

    #[error("dominant eigenvalue is not real (imaginary part {imag:.3e})")]
    ComplexDominant { imag: f64 },

    #[error("matrix is numerically defective: {0}")]
    DefectiveMatrix(String),

    #[error("noise model requires a symmetric system matrix")]
    AsymmetricSystem,

    #[error("noise model not supported by this operation: {0}")]
    UnsupportedNoise(String),

    #[error("iteration did not converge after {iterations} steps (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("state norm exceeded the floating range at step {step}")]
    Overflow { step: usize },

    #[error("fit window is degenerate: {0}")]
    DegenerateWindow(String),

    #[error("matrix has a negative entry at ({row},{col})")]
    NegativeEntry { row: usize, col: usize },

    #[error("matrix is not primitive")]
    NotPrimitive,

    #[error("ensemble rejection sampling exhausted after {attempts} attempts")]
    RejectionExhausted { attempts: usize },

    #[error("system does not converge in mean (lambda = {lambda})")]
    UnstableMean { lambda: f64 },

    #[error("spectral summary is missing data: {0}")]
    IncompleteSummary(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
