//! Moment Lyapunov exponents and noise-stability thresholds for discrete
//! linear systems with multiplicative white noise,
//! x^t = (A + B^t) x^{t-1}.
//!
//! The crate provides:
//!
//! - [`spectral`]: dominant eigen-structure and conditioning diagnostics
//!   of the unperturbed matrix (condition of lambda, eigenvalue gap, w^2,
//!   Henrici number, the alpha correction sequence);
//! - [`noise`]: the five noise models (UH/SH/T/UP/SP), their sampling,
//!   correlation rules, and the small parameter eps^2;
//! - [`dynamics`]: seeded Monte Carlo moment estimation with bootstrap
//!   errors, plus the exact second-moment covariance propagator and the
//!   operator exponent used as ground truth;
//! - [`analytic`]: scalar results, the perturbation expansion, the
//!   iteration method, the large-noise limit, critical noise values,
//!   stability diagrams, and norm-based convergence bounds;
//! - [`structure`]: nonnegative-matrix classification and reduction to
//!   primitive blocks;
//! - [`ensemble`]: random-matrix ensembles for conditioning scatter
//!   studies;
//! - [`report`]: one-call composition of every route into a stability
//!   report.

pub mod analytic;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod fixtures;
pub mod matrix;
pub mod noise;
pub mod report;
pub mod rng;
pub mod spectral;
pub mod structure;

pub use error::{Error, Result};
pub use matrix::MatrixSpec;
