//! Small-noise perturbation expansion of the moment Lyapunov exponents.

use serde::Serialize;

use super::{lp_small_noise, LyapunovEstimate, Method};
use crate::error::{Error, Result};
use crate::noise::NoiseStats;
use crate::spectral::SpectralSummary;

/// Perturbation estimate plus the asymptotic moment prediction
/// <|x^t|^p> ~ |<x^t>|^p exp(t eps^2 p(p-1)/2).
#[derive(Debug, Clone, Serialize)]
pub struct PerturbationPrediction {
    pub estimate: LyapunovEstimate,
    pub eps2: f64,
    pub p: u32,
}

impl PerturbationPrediction {
    /// Noise-driven growth factor of the p-th moment at time t.
    pub fn growth_factor(&self, t: usize) -> f64 {
        let pf = f64::from(self.p);
        (t as f64 * self.eps2 * pf * (pf - 1.0) / 2.0).exp()
    }

    /// Moment prediction given the unperturbed norm |<x^t>|.
    pub fn moment_prediction(&self, t: usize, unperturbed_norm: f64) -> f64 {
        unperturbed_norm.powi(self.p as i32) * self.growth_factor(t)
    }
}

/// L_p = p log(lambda) + p(p-1) eps^2 / 2 with eps^2 from the noise model.
pub fn perturbation_lp(
    summary: &SpectralSummary,
    stats: &NoiseStats,
    p: u32,
) -> Result<PerturbationPrediction> {
    if summary.lambda <= 0.0 {
        return Err(Error::InvalidParameter(
            "perturbation expansion needs a positive dominant eigenvalue".into(),
        ));
    }
    let value = lp_small_noise(summary.lambda.ln(), stats.eps2, p);
    let mut estimate = LyapunovEstimate::new(Method::Perturbation, p, value);
    if stats.eps2 > 0.1 {
        estimate = estimate.with_note(format!(
            "eps^2 = {:.3} is not small; the expansion degrades",
            stats.eps2
        ));
    }
    estimate = estimate
        .with_note("assumes P(|eps| > 1) = 0, which sampling cannot verify exactly".to_string());
    Ok(PerturbationPrediction { estimate, eps2: stats.eps2, p })
}

/// Large-n second-moment forms for homogeneous noise: lambda = n a for
/// arbitrary systems and n a + sigma_a^2/a for symmetric ones, with the
/// noise correction damped by n^2 (arbitrary) or (n^2 + 2 n sigma_a^2/a^2)/2
/// (symmetric).
pub fn large_n_l2(
    n: usize,
    a: f64,
    sigma_a2: f64,
    b2: f64,
    symmetric: bool,
) -> Result<LyapunovEstimate> {
    if a <= 0.0 {
        return Err(Error::InvalidParameter("element mean a must be positive".into()));
    }
    let nf = n as f64;
    let (lambda, damping) = if symmetric {
        (nf * a + sigma_a2 / a, (nf * nf + 2.0 * nf * sigma_a2 / (a * a)) / 2.0)
    } else {
        (nf * a, nf * nf)
    };
    if lambda <= 0.0 {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} must be positive")));
    }
    let value = 2.0 * lambda.ln() + (b2 / (a * a)) / damping;
    Ok(LyapunovEstimate::new(Method::Perturbation, 2, value))
}
