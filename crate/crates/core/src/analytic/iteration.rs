//! The iteration method: second-moment growth as the largest eigenvalue of
//! a small transfer matrix over run-length classes, plus its large-noise
//! expansion.
//!
//! Class transitions follow runs of consecutive unperturbed steps between
//! noise hits. A run of j steps carries the exact gain alpha_j lambda^{2j}
//! f_u f_v b^2; order r keeps alpha_1..alpha_r and carries longer runs at
//! the alpha_r level. The first approximation (r = 1) predates the alpha
//! corrections and is the closed form mu_1; with every alpha equal to 1
//! the matrix collapses to that closed form for any r.

use nalgebra::{DMatrix, DVector};

use super::{noise_only_value, LyapunovEstimate, Method};
use crate::error::{Error, Result};
use crate::noise::{NoiseModel, NoiseStats};
use crate::spectral::SpectralSummary;

const POWER_TOL: f64 = 1e-12;
const POWER_CAP: usize = 100_000;

/// Largest eigenvalue mu_1 of the 2x2 first-approximation matrix
/// [[l^2, f_v l^2 / n], [n f_u b^2, n^k b^2]].
fn mu1(lambda: f64, n: usize, k: u32, b2: f64, f_u: f64, f_v: f64) -> f64 {
    let l2 = lambda * lambda;
    let nk = (n as f64).powi(k as i32);
    let d = (l2 - nk * b2).powi(2) + 4.0 * l2 * b2 * f_u * f_v;
    (l2 + nk * b2 + d.sqrt()) / 2.0
}

/// Largest eigenvalue of an entrywise-nonnegative matrix by power
/// iteration.
fn nonneg_largest_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    let n = m.nrows();
    let mut x = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut mu_prev = f64::NAN;
    for _ in 0..POWER_CAP {
        let y = m * &x;
        let mu = y.norm();
        if mu == 0.0 {
            return Ok(0.0);
        }
        let y = y / mu;
        let settled =
            (mu - mu_prev).abs() <= POWER_TOL * mu.max(1e-300) && (&y - &x).norm() <= 1e-10;
        x = y;
        mu_prev = mu;
        if settled {
            return Ok(mu);
        }
    }
    Err(Error::NonConvergence { iterations: POWER_CAP, residual: mu_prev })
}

/// Builds the (r+1) x (r+1) run-length transfer matrix for homogeneous
/// noise, r >= 2, using alpha_1..alpha_r.
#[allow(clippy::too_many_arguments)]
fn transfer_matrix(
    lambda: f64,
    alpha: &[f64],
    f_u: f64,
    f_v: f64,
    k: u32,
    n: usize,
    b2: f64,
    r: usize,
) -> DMatrix<f64> {
    let l2 = lambda * lambda;
    let nf = n as f64;
    let mut m = DMatrix::zeros(r + 1, r + 1);
    // Row 0: runs of length >= r keep absorbing unperturbed steps.
    m[(0, 0)] = l2;
    m[(0, 1)] = l2 * alpha[r - 1] / alpha[r - 2];
    // Middle of the chain: run j -> j+1 carries alpha_{j+1}/alpha_j.
    for i in 2..r {
        let j = r - i; // run length at class index i
        m[(i - 1, i)] = l2 * alpha[j] / alpha[j - 1];
    }
    // A fresh noise hit followed by one unperturbed step.
    m[(r - 1, r)] = l2 * alpha[0] * f_v / nf;
    // Noise hits: directionally aligned classes gain n f_u b^2, the
    // fresh-noise class n^k b^2.
    for col in 0..r {
        m[(r, col)] = nf * f_u * b2;
    }
    m[(r, r)] = nf.powi(k as i32) * b2;
    m
}

/// Second-moment Lyapunov exponent from the iteration method at order r.
///
/// Homogeneous UH/T noise supports any r; proportional UP noise only the
/// r = 1 closed form (with w^2 in place of the mean-value 1/n). alpha
/// factors are rescaled from their stored UH convention to the model's
/// correlation constants.
pub fn iteration_l2(
    summary: &SpectralSummary,
    stats: &NoiseStats,
    model: &NoiseModel,
    r: usize,
) -> Result<LyapunovEstimate> {
    if r == 0 {
        return Err(Error::InvalidParameter("iteration order r must be >= 1".into()));
    }
    let n = summary.dim();
    let lambda = summary.lambda;
    match *model {
        NoiseModel::Uh { b2, .. } | NoiseModel::T { b2, .. } => {
            if b2 == 0.0 {
                return Ok(LyapunovEstimate::new(
                    Method::IterationR,
                    2,
                    2.0 * lambda.abs().ln(),
                )
                .with_r(r));
            }
            let mu = if r == 1 {
                mu1(lambda, n, stats.k, b2, stats.f_u, stats.f_v)
            } else {
                let alpha = summary.alpha_rescaled(stats.f_u, stats.f_v);
                if alpha.len() < r {
                    return Err(Error::IncompleteSummary(format!(
                        "iteration order {r} needs {r} alpha entries, summary has {}",
                        alpha.len()
                    )));
                }
                let m = transfer_matrix(lambda, &alpha, stats.f_u, stats.f_v, stats.k, n, b2, r);
                nonneg_largest_eigenvalue(&m)?
            };
            Ok(LyapunovEstimate::new(Method::IterationR, 2, mu.ln()).with_r(r))
        }
        NoiseModel::Up { q, dist, .. } => {
            if r > 1 {
                return Err(Error::UnsupportedNoise(
                    "iteration beyond r = 1 applies to homogeneous noise only".into(),
                ));
            }
            if q == 0.0 {
                return Ok(LyapunovEstimate::new(
                    Method::IterationR,
                    2,
                    2.0 * lambda.abs().ln(),
                )
                .with_r(1));
            }
            let fq2 = dist.factor() * q * q;
            let w2 = summary.w2;
            let d = (1.0 - fq2 * w2).powi(2) + 4.0 * fq2 * w2 * w2;
            let mu = lambda * lambda * (1.0 + fq2 * w2 + d.sqrt()) / 2.0;
            Ok(LyapunovEstimate::new(Method::IterationR, 2, mu.ln()).with_r(1))
        }
        _ => Err(Error::UnsupportedNoise(format!(
            "iteration method covers UH, T, and UP (r = 1), not {}",
            model.kind_name()
        ))),
    }
}

/// Large-noise expansion L2 ~ log(n^k b^2) + delta alpha_1 f_u f_v / n^k
/// with delta = lambda^2 / (n^k b^2). A delta >= 1 is reported as a
/// validity note, not an error.
pub fn large_noise_l2_from_parts(
    lambda: f64,
    alpha1: f64,
    f_u: f64,
    f_v: f64,
    k: u32,
    n: usize,
    b2: f64,
) -> Result<LyapunovEstimate> {
    if b2 <= 0.0 {
        return Err(Error::InvalidParameter("large-noise expansion needs b2 > 0".into()));
    }
    let nk = (n as f64).powi(k as i32);
    let delta = lambda * lambda / (nk * b2);
    let value = noise_only_value(n, k, b2) + delta * alpha1 * f_u * f_v / nk;
    let mut est = LyapunovEstimate::new(Method::LargeNoise, 2, value);
    if delta >= 1.0 {
        est = est.with_note(format!(
            "delta = lambda^2/(n^k b^2) = {delta:.3} >= 1: outside the large-noise regime"
        ));
    }
    for (name, v) in [("alpha_1", alpha1), ("f_u", f_u), ("f_v", f_v)] {
        if v > 10.0 {
            est = est.with_note(format!("{name} = {v:.2} is not O(1); expansion unreliable"));
        }
    }
    Ok(est)
}

pub fn large_noise_l2(
    summary: &SpectralSummary,
    stats: &NoiseStats,
    model: &NoiseModel,
) -> Result<LyapunovEstimate> {
    let b2 = match *model {
        NoiseModel::Uh { b2, .. } | NoiseModel::T { b2, .. } => b2,
        _ => {
            return Err(Error::UnsupportedNoise(format!(
                "large-noise expansion covers UH and T, not {}",
                model.kind_name()
            )))
        }
    };
    let alpha1 = summary
        .alpha_rescaled(stats.f_u, stats.f_v)
        .first()
        .copied()
        .ok_or_else(|| Error::IncompleteSummary("summary has no alpha entries".into()))?;
    large_noise_l2_from_parts(
        summary.lambda,
        alpha1,
        stats.f_u,
        stats.f_v,
        stats.k,
        summary.dim(),
        b2,
    )
}
