//! Sufficient convergence bounds on the noise variance, from the matrix
//! 2-norm. These are the traditional alternative the critical value is
//! compared against, and they are far more restrictive.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::MatrixSpec;
use crate::noise::{sample_noise, NoiseModel};
use crate::rng::derive_rng;
use crate::spectral::{dominant_triple, matrix_two_norm, two_norm_dmatrix};

const NORM_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    /// Variance below which every moment converges: <|B|> < 1 - |A|_2,
    /// with <|B|> estimated by sampling. Clamped at 0 when |A|_2 >= 1.
    pub all_moment_b2: f64,
    /// Variance below which the second moment converges:
    /// (1 - |A|_2^2) / n^k. Clamped at 0 when |A|_2 >= 1.
    pub second_moment_b2: f64,
    /// Large-n reference form (1 - lambda)^2 / (4 n).
    pub large_n_any_moment: f64,
    /// Large-n reference form (1 - lambda^2) / n.
    pub large_n_second: f64,
    pub two_norm: f64,
    /// Sampled mean two-norm of the noise at unit variance.
    pub mean_unit_noise_norm: f64,
}

/// Sufficient thresholds for homogeneous noise on a mean-stable system.
pub fn convergence_bounds(a: &MatrixSpec, model: &NoiseModel, seed: u64) -> Result<BoundsReport> {
    let b2_unit = match *model {
        NoiseModel::Uh { .. } | NoiseModel::Sh { .. } | NoiseModel::T { .. } => 1.0,
        _ => {
            return Err(Error::UnsupportedNoise(format!(
                "norm bounds cover homogeneous noise, not {}",
                model.kind_name()
            )))
        }
    };
    let (lambda, _, _) = dominant_triple(a)?;
    if lambda >= 1.0 {
        return Err(Error::UnstableMean { lambda });
    }
    let n = a.dim() as f64;
    let norm_a = matrix_two_norm(a);

    // <|B|> at b^2 = 1; the norm scales linearly in b.
    let unit_model = match *model {
        NoiseModel::Uh { dist, .. } => NoiseModel::Uh { b2: b2_unit, dist, truncate: false },
        NoiseModel::Sh { dist, .. } => NoiseModel::Sh { b2: b2_unit, dist, truncate: false },
        NoiseModel::T { dist, .. } => NoiseModel::T { b2: b2_unit, dist, truncate: false },
        other => other,
    };
    let mut rng = derive_rng(seed, "bounds.noise_norm", 0);
    let mut mean_norm = 0.0;
    for _ in 0..NORM_SAMPLES {
        let b = sample_noise(&unit_model, a, &mut rng)?;
        mean_norm += two_norm_dmatrix(&b);
    }
    mean_norm /= NORM_SAMPLES as f64;

    let b_max = ((1.0 - norm_a) / mean_norm).max(0.0);
    // Worst-case per-step noise gain <|Bx|^2>/|x|^2 at unit variance:
    // n for independent, n + 1 for symmetric, n^2 for totally correlated.
    let gain = match model {
        NoiseModel::Uh { .. } => n,
        NoiseModel::Sh { .. } => n + 1.0,
        NoiseModel::T { .. } => n * n,
        _ => unreachable!(),
    };
    Ok(BoundsReport {
        all_moment_b2: b_max * b_max,
        second_moment_b2: ((1.0 - norm_a * norm_a) / gain).max(0.0),
        large_n_any_moment: (1.0 - lambda).powi(2) / (4.0 * n),
        large_n_second: (1.0 - lambda * lambda) / n,
        two_norm: norm_a,
        mean_unit_noise_norm: mean_norm,
    })
}
