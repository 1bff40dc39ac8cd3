//! Closed-form and approximate moment Lyapunov exponents: scalar results,
//! the perturbation expansion, the iteration method, the large-noise
//! limit, critical noise values, convergence bounds, and the continuous
//! mean-value cross-check.

mod bounds;
mod critical;
mod iteration;
mod perturbation;
mod scalar;

pub use bounds::{convergence_bounds, BoundsReport};
pub use critical::{critical_value, diagram_to_csv, stability_diagram, CriticalReport, DiagramRow};
pub use iteration::{iteration_l2, large_noise_l2, large_noise_l2_from_parts};
pub use perturbation::{large_n_l2, perturbation_lp, PerturbationPrediction};
pub use scalar::{
    continuous_mva_lp, noise_only_l2, noise_only_l2_average, normal_moment_ratios,
    scalar_lp_approx, scalar_moment_exact, uniform_moment_ratios, ContinuousComparison,
};

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ScalarExact,
    ScalarApprox,
    Perturbation,
    IterationR,
    LargeNoise,
    ExactOperator,
}

/// A moment Lyapunov exponent estimate with its provenance and any
/// domain-of-validity caveats.
#[derive(Debug, Clone, Serialize)]
pub struct LyapunovEstimate {
    pub method: Method,
    pub p: u32,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub validity: Vec<String>,
}

impl LyapunovEstimate {
    pub(crate) fn new(method: Method, p: u32, value: f64) -> Self {
        Self { method, p, value, r: None, validity: Vec::new() }
    }

    pub(crate) fn with_r(mut self, r: usize) -> Self {
        self.r = Some(r);
        self
    }

    pub(crate) fn with_note(mut self, note: impl Into<String>) -> Self {
        self.validity.push(note.into());
        self
    }
}

/// Shared small-noise expansion: p log(lambda) + p(p-1) eps^2 / 2.
///
/// Both the scalar approximation and the multivariate perturbation route
/// go through here, so the n = 1 reduction is bit-identical.
pub(crate) fn lp_small_noise(log_lambda: f64, eps2: f64, p: u32) -> f64 {
    let pf = f64::from(p);
    pf * log_lambda + pf * (pf - 1.0) * eps2 / 2.0
}

/// Shared zeroth-order large-noise value: log(n^k b^2).
pub(crate) fn noise_only_value(n: usize, k: u32, b2: f64) -> f64 {
    ((n as f64).powi(k as i32) * b2).ln()
}
