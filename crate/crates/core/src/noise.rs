//! The five multiplicative-noise models: definition, sampling, and
//! second-order statistics.
//!
//! Correlation rules, with (i,j) and (k,l) element index pairs:
//!
//! ```text
//! UH  <B_ij B_kl> = b^2 d_ik d_jl
//! SH  <B_ij B_kl> = b^2 (d_ik d_jl + d_il d_jk)
//! T   <B_ij B_kl> = b^2
//! UP  <B_ij B_kl> = f q^2 A_ij^2 d_ik d_jl
//! SP  <B_ij B_kl> = f q^2 A_ij^2 (d_ik d_jl + d_il d_jk)
//! ```
//!
//! Proportional models draw B_ij = q A_ij xi with xi unit-scale (standard
//! normal, or uniform on [-1,1]), so the effective element variance is
//! f q^2 A_ij^2 with f = 1 (normal) or 1/3 (uniform). Homogeneous models
//! are scaled so the element variance is exactly b^2 for either
//! distribution. The symmetric kinds assume a symmetric system matrix.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::MatrixSpec;
use crate::spectral::SpectralSummary;

const SYMMETRY_TOL: f64 = 1e-12;
/// Cap on rejection resampling when entry truncation is on.
const TRUNCATION_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementDist {
    #[default]
    Normal,
    Uniform,
}

impl ElementDist {
    /// Distribution factor from the proportional-noise tables:
    /// the second moment of the unit-scale element variable.
    pub fn factor(self) -> f64 {
        match self {
            ElementDist::Normal => 1.0,
            ElementDist::Uniform => 1.0 / 3.0,
        }
    }
}

/// Tagged union over the five noise models.
///
/// JSON form: `{"kind":"UH","b2":0.04,"dist":"normal"}` or
/// `{"kind":"UP","q":0.5,"dist":"uniform"}`. `dist` defaults to normal,
/// `truncate` to false.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum NoiseModel {
    /// Uncorrelated homogeneous: independent elements, variance b^2.
    #[serde(rename = "UH")]
    Uh {
        b2: f64,
        #[serde(default)]
        dist: ElementDist,
        #[serde(default)]
        truncate: bool,
    },
    /// Symmetrically correlated homogeneous: B_ij = B_ji, variance b^2
    /// off the diagonal and 2 b^2 on it (the printed rule, both delta
    /// products firing).
    #[serde(rename = "SH")]
    Sh {
        b2: f64,
        #[serde(default)]
        dist: ElementDist,
        #[serde(default)]
        truncate: bool,
    },
    /// Totally correlated: every element equal, variance b^2.
    #[serde(rename = "T")]
    T {
        b2: f64,
        #[serde(default)]
        dist: ElementDist,
        #[serde(default)]
        truncate: bool,
    },
    /// Uncorrelated proportional: sd of B_ij proportional to A_ij.
    #[serde(rename = "UP")]
    Up {
        q: f64,
        #[serde(default)]
        dist: ElementDist,
        #[serde(default)]
        truncate: bool,
    },
    /// Symmetrically correlated proportional.
    #[serde(rename = "SP")]
    Sp {
        q: f64,
        #[serde(default)]
        dist: ElementDist,
        #[serde(default)]
        truncate: bool,
    },
}

impl NoiseModel {
    pub fn uh(b2: f64) -> Self {
        NoiseModel::Uh { b2, dist: ElementDist::Normal, truncate: false }
    }

    pub fn sh(b2: f64) -> Self {
        NoiseModel::Sh { b2, dist: ElementDist::Normal, truncate: false }
    }

    pub fn t(b2: f64) -> Self {
        NoiseModel::T { b2, dist: ElementDist::Normal, truncate: false }
    }

    pub fn up(q: f64) -> Self {
        NoiseModel::Up { q, dist: ElementDist::Normal, truncate: false }
    }

    pub fn sp(q: f64) -> Self {
        NoiseModel::Sp { q, dist: ElementDist::Normal, truncate: false }
    }

    pub fn with_dist(self, dist: ElementDist) -> Self {
        match self {
            NoiseModel::Uh { b2, truncate, .. } => NoiseModel::Uh { b2, dist, truncate },
            NoiseModel::Sh { b2, truncate, .. } => NoiseModel::Sh { b2, dist, truncate },
            NoiseModel::T { b2, truncate, .. } => NoiseModel::T { b2, dist, truncate },
            NoiseModel::Up { q, truncate, .. } => NoiseModel::Up { q, dist, truncate },
            NoiseModel::Sp { q, truncate, .. } => NoiseModel::Sp { q, dist, truncate },
        }
    }

    pub fn with_truncation(self) -> Self {
        match self {
            NoiseModel::Uh { b2, dist, .. } => NoiseModel::Uh { b2, dist, truncate: true },
            NoiseModel::Sh { b2, dist, .. } => NoiseModel::Sh { b2, dist, truncate: true },
            NoiseModel::T { b2, dist, .. } => NoiseModel::T { b2, dist, truncate: true },
            NoiseModel::Up { q, dist, .. } => NoiseModel::Up { q, dist, truncate: true },
            NoiseModel::Sp { q, dist, .. } => NoiseModel::Sp { q, dist, truncate: true },
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            NoiseModel::Uh { .. } => "UH",
            NoiseModel::Sh { .. } => "SH",
            NoiseModel::T { .. } => "T",
            NoiseModel::Up { .. } => "UP",
            NoiseModel::Sp { .. } => "SP",
        }
    }

    pub fn dist(&self) -> ElementDist {
        match *self {
            NoiseModel::Uh { dist, .. }
            | NoiseModel::Sh { dist, .. }
            | NoiseModel::T { dist, .. }
            | NoiseModel::Up { dist, .. }
            | NoiseModel::Sp { dist, .. } => dist,
        }
    }

    pub fn truncate(&self) -> bool {
        match *self {
            NoiseModel::Uh { truncate, .. }
            | NoiseModel::Sh { truncate, .. }
            | NoiseModel::T { truncate, .. }
            | NoiseModel::Up { truncate, .. }
            | NoiseModel::Sp { truncate, .. } => truncate,
        }
    }

    /// Element variance b^2 of the homogeneous kinds.
    pub fn b2(&self) -> Option<f64> {
        match *self {
            NoiseModel::Uh { b2, .. } | NoiseModel::Sh { b2, .. } | NoiseModel::T { b2, .. } => {
                Some(b2)
            }
            _ => None,
        }
    }

    /// Proportionality constant q of the proportional kinds.
    pub fn q(&self) -> Option<f64> {
        match *self {
            NoiseModel::Up { q, .. } | NoiseModel::Sp { q, .. } => Some(q),
            _ => None,
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        self.b2().is_some()
    }

    pub fn requires_symmetric(&self) -> bool {
        matches!(self, NoiseModel::Sh { .. } | NoiseModel::Sp { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(b2) = self.b2() {
            if !(b2 >= 0.0 && b2.is_finite()) {
                return Err(Error::InvalidParameter(format!("b2 = {b2} must be >= 0")));
            }
        }
        if let Some(q) = self.q() {
            if !(q >= 0.0 && q.is_finite()) {
                return Err(Error::InvalidParameter(format!("q = {q} must be >= 0")));
            }
        }
        Ok(())
    }

    fn check_symmetry(&self, a: &MatrixSpec) -> Result<()> {
        if self.requires_symmetric() && !a.is_symmetric(SYMMETRY_TOL) {
            return Err(Error::AsymmetricSystem);
        }
        Ok(())
    }
}

/// Correlation constants entering the perturbation and iteration formulas.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NoiseStats {
    /// Second moment of v^T B u / lambda.
    pub eps2: f64,
    pub f_u: f64,
    pub f_v: f64,
    /// 1 for independent elements, 2 for totally correlated ones.
    pub k: u32,
}

/// Unit-scale draw: standard normal or uniform on [-1,1].
fn unit_draw<R: Rng + ?Sized>(dist: ElementDist, rng: &mut R) -> f64 {
    match dist {
        ElementDist::Normal => Normal::new(0.0, 1.0).unwrap().sample(rng),
        ElementDist::Uniform => Uniform::new_inclusive(-1.0, 1.0).sample(rng),
    }
}

/// Draw with a prescribed variance for either distribution.
fn scaled_draw<R: Rng + ?Sized>(dist: ElementDist, variance: f64, rng: &mut R) -> f64 {
    let sd_scale = (variance / dist.factor()).sqrt();
    sd_scale * unit_draw(dist, rng)
}

fn sample_once<R: Rng + ?Sized>(
    model: &NoiseModel,
    a: &MatrixSpec,
    rng: &mut R,
) -> DMatrix<f64> {
    let n = a.dim();
    match *model {
        NoiseModel::Uh { b2, dist, .. } => {
            let mut b = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    b[(i, j)] = scaled_draw(dist, b2, rng);
                }
            }
            b
        }
        NoiseModel::Sh { b2, dist, .. } => {
            let mut b = DMatrix::zeros(n, n);
            for i in 0..n {
                // Diagonal variance is 2 b^2: both delta products fire.
                b[(i, i)] = scaled_draw(dist, 2.0 * b2, rng);
                for j in (i + 1)..n {
                    let x = scaled_draw(dist, b2, rng);
                    b[(i, j)] = x;
                    b[(j, i)] = x;
                }
            }
            b
        }
        NoiseModel::T { b2, dist, .. } => {
            let beta = scaled_draw(dist, b2, rng);
            DMatrix::from_element(n, n, beta)
        }
        NoiseModel::Up { q, dist, .. } => {
            let mut b = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    b[(i, j)] = q * a.entry(i, j) * unit_draw(dist, rng);
                }
            }
            b
        }
        NoiseModel::Sp { q, dist, .. } => {
            let mut b = DMatrix::zeros(n, n);
            for i in 0..n {
                // sqrt(2) on the diagonal reproduces the 2 f q^2 A_ii^2 variance.
                b[(i, i)] = q * a.entry(i, i) * std::f64::consts::SQRT_2 * unit_draw(dist, rng);
                for j in (i + 1)..n {
                    let xi = unit_draw(dist, rng);
                    b[(i, j)] = q * a.entry(i, j) * xi;
                    b[(j, i)] = q * a.entry(j, i) * xi;
                }
            }
            b
        }
    }
}

/// Draws one noise matrix. Successive calls on the same stream are
/// independent (white noise).
pub fn sample_noise<R: Rng + ?Sized>(
    model: &NoiseModel,
    a: &MatrixSpec,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    model.validate()?;
    model.check_symmetry(a)?;
    if !model.truncate() {
        return Ok(sample_once(model, a, rng));
    }
    // Optional truncation: reject draws with any element beyond the mean
    // element of A ("noises larger than a were not allowed").
    let threshold = a.element_mean().abs();
    for _ in 0..TRUNCATION_ATTEMPTS {
        let b = sample_once(model, a, rng);
        if b.iter().all(|x| x.abs() <= threshold) {
            return Ok(b);
        }
    }
    Err(Error::RejectionExhausted { attempts: TRUNCATION_ATTEMPTS })
}

/// Exact pair covariance <B_ij B_kl> under the model's correlation rule.
pub fn noise_covariance(
    model: &NoiseModel,
    a: &MatrixSpec,
    i: usize,
    j: usize,
    k: usize,
    l: usize,
) -> f64 {
    let d = |x: usize, y: usize| if x == y { 1.0 } else { 0.0 };
    let f = model.dist().factor();
    match *model {
        NoiseModel::Uh { b2, .. } => b2 * d(i, k) * d(j, l),
        NoiseModel::Sh { b2, .. } => b2 * (d(i, k) * d(j, l) + d(i, l) * d(j, k)),
        NoiseModel::T { b2, .. } => b2,
        NoiseModel::Up { q, .. } => {
            f * q * q * a.entry(i, j).powi(2) * d(i, k) * d(j, l)
        }
        NoiseModel::Sp { q, .. } => {
            f * q * q * a.entry(i, j).powi(2) * (d(i, k) * d(j, l) + d(i, l) * d(j, k))
        }
    }
}

/// The small parameter eps^2 = <(v^T B u / lambda)^2> plus the correlation
/// constants (f_u, f_v, k).
///
/// f_u, f_v, k carry the standard homogeneous-noise conventions for UH
/// and T. For the other kinds
/// they are filled with the convention eps2 = f_u f_v (element variance)
/// / lambda^2, and are not consumed by the iteration or critical-value
/// formulas (which accept UH/T only).
pub fn epsilon_squared(
    model: &NoiseModel,
    summary: &SpectralSummary,
    a: &MatrixSpec,
) -> Result<NoiseStats> {
    model.validate()?;
    model.check_symmetry(a)?;
    if summary.dim() != a.dim() {
        return Err(Error::DimensionMismatch(format!(
            "summary dim {} vs matrix dim {}",
            summary.dim(),
            a.dim()
        )));
    }
    let lam2 = summary.lambda * summary.lambda;
    let n = a.dim() as f64;
    let f = model.dist().factor();
    let v = &summary.v;
    let u = &summary.u;
    match *model {
        NoiseModel::Uh { b2, .. } => Ok(NoiseStats {
            eps2: summary.v2() * b2 / lam2,
            f_u: 1.0,
            f_v: summary.v2(),
            k: 1,
        }),
        NoiseModel::Sh { b2, .. } => Ok(NoiseStats {
            eps2: 2.0 * b2 / lam2,
            f_u: 1.0,
            f_v: 2.0,
            k: 1,
        }),
        NoiseModel::T { b2, .. } => {
            let su = u.iter().sum::<f64>();
            let sv = v.iter().sum::<f64>();
            Ok(NoiseStats {
                eps2: b2 * su * su * sv * sv / lam2,
                f_u: su * su,
                f_v: sv * sv,
                k: 2,
            })
        }
        NoiseModel::Up { q, .. } => {
            let mut s = 0.0;
            for i in 0..a.dim() {
                for j in 0..a.dim() {
                    s += v[i] * v[i] * a.entry(i, j).powi(2) * u[j] * u[j];
                }
            }
            Ok(NoiseStats {
                eps2: f * q * q * s / lam2,
                f_u: 1.0,
                f_v: n * summary.w2,
                k: 1,
            })
        }
        NoiseModel::Sp { q, .. } => {
            let mut s = 0.0;
            for i in 0..a.dim() {
                for j in 0..a.dim() {
                    let a2 = a.entry(i, j).powi(2);
                    s += a2 * (v[i] * v[i] * u[j] * u[j] + v[i] * v[j] * u[i] * u[j]);
                }
            }
            Ok(NoiseStats {
                eps2: f * q * q * s / lam2,
                f_u: 1.0,
                f_v: 2.0 * n * summary.w2,
                k: 1,
            })
        }
    }
}
