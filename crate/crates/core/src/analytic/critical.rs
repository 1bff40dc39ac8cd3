//! Critical noise variance for second-moment divergence and the stability
//! diagram across the dominant-eigenvalue range.

use rayon::prelude::*;
use serde::Serialize;

use super::bounds::{convergence_bounds, BoundsReport};
use crate::dynamics::{exact_l2, SystemSpec};
use crate::error::{Error, Result};
use crate::matrix::MatrixSpec;
use crate::noise::{NoiseModel, NoiseStats};
use crate::spectral::SpectralSummary;

const BISECTION_TOL: f64 = 1e-10;
const BRACKET_EXPANSIONS: usize = 60;

/// Critical values from every route, plus the Appendix-style sufficient
/// bounds for comparison.
#[derive(Debug, Clone, Serialize)]
pub struct CriticalReport {
    /// lambda >= 1: the mean diverges and no critical value exists.
    pub unstable_mean: bool,
    /// Small-noise form 1/(n^k + f_u f_v lambda^2/(1-lambda^2)).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bc2_small: Option<f64>,
    /// Large-noise form with the alpha_1 correction inserted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bc2_large: Option<f64>,
    /// The unified expression proposed for all noise ranges.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bc2_unified: Option<f64>,
    /// Root of exact_L2(b^2) = 0 by bisection on the covariance operator.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bc2_exact: Option<f64>,
    /// Proportional-noise critical factor q_c = n sqrt(bc2)/lambda
    /// (mean-value diagram).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qc: Option<f64>,
    /// Sufficient convergence thresholds (all-moment and second-moment).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn unified_bc2(n: usize, k: u32, ff: f64, lambda: f64) -> f64 {
    let nk = (n as f64).powi(k as i32);
    let l2 = lambda * lambda;
    1.0 / (nk + ff * l2 / (1.0 - l2))
}

/// Critical variance report for homogeneous (UH/T) noise on `a`.
///
/// When lambda >= 1 the report carries the unstable-mean flag and no
/// values. bc2_exact is found by bisection of the exact operator
/// exponent; failures there degrade to a note instead of an error.
pub fn critical_value(
    a: &MatrixSpec,
    summary: &SpectralSummary,
    stats: &NoiseStats,
    model: &NoiseModel,
    seed: u64,
) -> Result<CriticalReport> {
    if !matches!(model, NoiseModel::Uh { .. } | NoiseModel::T { .. }) {
        return Err(Error::UnsupportedNoise(format!(
            "critical value is developed for homogeneous UH/T noise, not {}",
            model.kind_name()
        )));
    }
    let lambda = summary.lambda;
    let mut notes = Vec::new();
    if lambda >= 1.0 {
        return Ok(CriticalReport {
            unstable_mean: true,
            bc2_small: None,
            bc2_large: None,
            bc2_unified: None,
            bc2_exact: None,
            qc: None,
            bounds: None,
            notes: vec![format!("lambda = {lambda:.6} >= 1: mean diverges, critical value undefined")],
        });
    }
    let n = summary.dim();
    let ff = stats.f_u * stats.f_v;
    let alpha1 = summary.alpha_rescaled(stats.f_u, stats.f_v)[0];
    let bc2_small = unified_bc2(n, stats.k, ff, lambda);
    let bc2_large = unified_bc2(n, stats.k, alpha1 * ff, lambda);
    let bc2_unified = bc2_small;

    let bc2_exact = match bisect_exact(a, model, 2.0 * bc2_unified) {
        Ok(v) => Some(v),
        Err(e) => {
            notes.push(format!("exact bisection unavailable: {e}"));
            None
        }
    };

    let qc = if lambda > 0.0 { Some(n as f64 * bc2_unified.sqrt() / lambda) } else { None };

    let bounds = match convergence_bounds(a, model, seed) {
        Ok(b) => Some(b),
        Err(e) => {
            notes.push(format!("convergence bounds unavailable: {e}"));
            None
        }
    };

    if !(0.8..=1.3).contains(&alpha1) {
        notes.push(format!(
            "alpha_1 = {alpha1:.3}: system is not well-behaved, the unified form degrades"
        ));
    }

    Ok(CriticalReport {
        unstable_mean: false,
        bc2_small: Some(bc2_small),
        bc2_large: Some(bc2_large),
        bc2_unified: Some(bc2_unified),
        bc2_exact,
        qc,
        bounds,
        notes,
    })
}

fn with_b2(model: &NoiseModel, b2: f64) -> NoiseModel {
    match *model {
        NoiseModel::Uh { dist, truncate, .. } => NoiseModel::Uh { b2, dist, truncate },
        NoiseModel::T { dist, truncate, .. } => NoiseModel::T { b2, dist, truncate },
        other => other,
    }
}

/// Root of exact_L2(b^2) = 0, bracketed from [0, hi] with geometric
/// expansion when the initial bracket has no sign change.
fn bisect_exact(a: &MatrixSpec, model: &NoiseModel, hi0: f64) -> Result<f64> {
    let n = a.dim();
    let eval = |b2: f64| -> Result<f64> {
        let sys = SystemSpec::new(a.clone(), with_b2(model, b2), vec![1.0; n])?;
        exact_l2(&sys)
    };
    let mut lo = 0.0f64;
    let mut hi = hi0.max(1e-6);
    let mut f_hi = eval(hi)?;
    let mut expansions = 0;
    while f_hi <= 0.0 {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > BRACKET_EXPANSIONS {
            return Err(Error::NonConvergence {
                iterations: expansions,
                residual: f_hi,
            });
        }
        f_hi = eval(hi)?;
    }
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if eval(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagramRow {
    pub lambda: f64,
    pub bc2: f64,
    pub qc: f64,
}

/// Stability-boundary table across a lambda grid with the correlation
/// constants fixed at their mean-value values (f_u f_v = 1 for UH, n^2
/// for T).
pub fn stability_diagram(n: usize, model: &NoiseModel, lambda_grid: &[f64]) -> Result<Vec<DiagramRow>> {
    let (k, ff) = match model {
        NoiseModel::Uh { .. } => (1u32, 1.0),
        NoiseModel::T { .. } => (2u32, (n * n) as f64),
        _ => {
            return Err(Error::UnsupportedNoise(format!(
                "stability diagram covers UH and T, not {}",
                model.kind_name()
            )))
        }
    };
    for &l in lambda_grid {
        if !(l > 0.0 && l < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda grid values must lie in (0,1), got {l}"
            )));
        }
    }
    Ok(lambda_grid
        .par_iter()
        .map(|&lambda| {
            let bc2 = unified_bc2(n, k, ff, lambda);
            DiagramRow { lambda, bc2, qc: n as f64 * bc2.sqrt() / lambda }
        })
        .collect())
}

/// CSV form of a stability diagram: lambda,bc2,qc.
pub fn diagram_to_csv(rows: &[DiagramRow]) -> String {
    let mut out = String::from("lambda,bc2,qc\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.lambda, r.bc2, r.qc));
    }
    out
}
