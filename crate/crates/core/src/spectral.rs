//! Eigen-structure extraction and conditioning diagnostics for the
//! unperturbed matrix.
//!
//! The dominant pair (lambda, u, v) drives everything downstream: u is the
//! unit right eigenvector, v the left eigenvector scaled so v.u = 1, and
//! |v| is the condition of lambda. Eigenvalues come from a dense Schur
//! sweep; the two dominant eigenvectors come from inverse iteration, never
//! from inverting the full eigenvector matrix.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix::MatrixSpec;

/// Relative gap below which the dominant eigenvalue counts as tied.
const DOMINANCE_GAP_TOL: f64 = 1e-9;
/// Imaginary part above this fraction of the matrix scale is complex.
const DOMINANCE_IMAG_TOL: f64 = 1e-10;
/// Target residual for inverse iteration, relative to the matrix scale.
const EIGENVECTOR_TOL: f64 = 1e-12;
/// Residual the spec contract actually promises.
const RESIDUAL_CONTRACT: f64 = 1e-8;

/// Conditioning diagnostics of a matrix with a simple dominant eigenvalue.
#[derive(Debug, Clone)]
pub struct SpectralSummary {
    /// Dominant eigenvalue (real, simple, strictly dominant in magnitude).
    pub lambda: f64,
    /// Magnitude of the second-largest eigenvalue.
    pub lambda2_abs: f64,
    /// lambda - |lambda2|.
    pub gap: f64,
    /// Unit right dominant eigenvector.
    pub u: DVector<f64>,
    /// Left dominant eigenvector scaled so v.u = 1.
    pub v: DVector<f64>,
    /// Condition of lambda: |v|.
    pub kappa: f64,
    /// sum_i v_i^2 u_i^2. At least 1/n always (Cauchy-Schwarz on v.u = 1);
    /// at most 1 whenever the products v_i u_i are nonnegative, which
    /// Perron-Frobenius guarantees for nonnegative systems and v = u for
    /// symmetric ones. Mixed-sign ill-conditioned systems can exceed 1.
    pub w2: f64,
    /// Frobenius norm of A A^T - A^T A (departure from normality).
    pub henrici: f64,
    /// alpha_r = sum_ab (A^r_ab)^2 / (f_u f_v lambda^{2r}) for r = 1..r_max,
    /// stored with the uncorrelated-homogeneous convention f_u = 1, f_v = v^2.
    pub alpha: Vec<f64>,
}

impl SpectralSummary {
    pub fn dim(&self) -> usize {
        self.u.len()
    }

    /// v^2 = kappa^2, the squared norm of the left eigenvector.
    pub fn v2(&self) -> f64 {
        self.kappa * self.kappa
    }

    /// alpha_r rescaled for a noise model with correlation constants
    /// (f_u, f_v): alpha is stored against f_u = 1, f_v = v^2.
    pub fn alpha_rescaled(&self, f_u: f64, f_v: f64) -> Vec<f64> {
        let base = self.v2();
        self.alpha.iter().map(|a| a * base / (f_u * f_v)).collect()
    }
}

fn matrix_scale(a: &DMatrix<f64>) -> f64 {
    a.norm().max(f64::MIN_POSITIVE)
}

/// Largest-magnitude first; ties broken arbitrarily. Goes through the
/// capped Schur sweep: the uncapped one can cycle forever on degenerate
/// inputs (an all-zero matrix among them).
fn sorted_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if a.iter().all(|&x| x == 0.0) {
        return Ok(vec![Complex::new(0.0, 0.0); a.nrows()]);
    }
    let schur = a
        .clone()
        .try_schur(f64::EPSILON, 50_000)
        .ok_or_else(|| Error::NonConvergence { iterations: 50_000, residual: f64::NAN })?;
    let mut eig: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    if eig.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::NonConvergence { iterations: 50_000, residual: f64::NAN });
    }
    eig.sort_by(|x, y| y.norm().total_cmp(&x.norm()));
    Ok(eig)
}

/// Inverse iteration for the eigenvector of `a` at the (real) eigenvalue
/// `lambda`. Returns a unit vector with residual |A x - lambda x| below
/// `tol * scale`, or the best vector found if the tolerance stalls.
fn inverse_iteration(a: &DMatrix<f64>, lambda: f64, scale: f64) -> Result<DVector<f64>> {
    let n = a.nrows();
    let mut shift = 0.0f64;
    for attempt in 0..6 {
        let shifted = a - DMatrix::identity(n, n) * (lambda + shift);
        let lu = shifted.lu();
        // Deterministic start that is unlikely to be orthogonal to the target.
        let mut x = DVector::from_fn(n, |i, _| 1.0 + 0.137 * (i as f64 + 1.0));
        x /= x.norm();
        let mut best: Option<(f64, DVector<f64>)> = None;
        for _ in 0..64 {
            let Some(mut y) = lu.solve(&x) else { break };
            let ny = y.norm();
            if !ny.is_finite() || ny == 0.0 {
                break;
            }
            y /= ny;
            let residual = (a * &y - &y * lambda).norm();
            if best.as_ref().is_none_or(|(r, _)| residual < *r) {
                best = Some((residual, y.clone()));
            }
            if residual <= EIGENVECTOR_TOL * scale {
                break;
            }
            x = y;
        }
        if let Some((residual, mut y)) = best {
            if residual <= RESIDUAL_CONTRACT * scale {
                // Sign convention: largest-magnitude component positive.
                let imax = y.iter().enumerate().fold(0, |im, (i, &c)| {
                    if c.abs() > y[im].abs() {
                        i
                    } else {
                        im
                    }
                });
                if y[imax] < 0.0 {
                    y = -y;
                }
                return Ok(y);
            }
        }
        // Exactly singular shifted matrix or stalled iteration: nudge the shift.
        shift = scale * 1e-13 * 10f64.powi(attempt);
    }
    Err(Error::DefectiveMatrix(format!(
        "inverse iteration stalled at eigenvalue {lambda}"
    )))
}

/// Extracts (lambda, u, v) with |u| = 1 and v.u = 1.
///
/// Errors with `NonSimpleDominant` when the dominant eigenvalue is repeated
/// or tied in magnitude, and `ComplexDominant` when it is not real; both
/// mark the system as outside the theory's scope.
pub fn dominant_triple(a: &MatrixSpec) -> Result<(f64, DVector<f64>, DVector<f64>)> {
    let m = a.as_dmatrix();
    let n = a.dim();
    if n == 1 {
        let lambda = m[(0, 0)];
        return Ok((lambda, DVector::from_element(1, 1.0), DVector::from_element(1, 1.0)));
    }
    let scale = matrix_scale(m);
    let eig = sorted_eigenvalues(m)?;
    let top = eig[0];
    if top.im.abs() > DOMINANCE_IMAG_TOL * scale {
        return Err(Error::ComplexDominant { imag: top.im });
    }
    let lambda = top.re;
    let lambda2_abs = eig[1].norm();
    let gap_ratio = (lambda - lambda2_abs) / lambda;
    if !gap_ratio.is_finite() || gap_ratio <= DOMINANCE_GAP_TOL {
        return Err(Error::NonSimpleDominant { gap_ratio });
    }

    let u = inverse_iteration(m, lambda, scale)?;
    let mut v = inverse_iteration(&m.transpose(), lambda, scale)?;
    let vu = v.dot(&u);
    if vu.abs() < 1e-12 * v.norm() {
        return Err(Error::NonSimpleDominant {
            gap_ratio: vu.abs(),
        });
    }
    v /= vu;
    Ok((lambda, u, v))
}

/// Full conditioning summary, with `r_max` entries of the alpha sequence.
pub fn spectral_summary(a: &MatrixSpec, r_max: usize) -> Result<SpectralSummary> {
    let (lambda, u, v) = dominant_triple(a)?;
    let m = a.as_dmatrix();
    let n = a.dim();

    let lambda2_abs = if n == 1 {
        0.0
    } else {
        sorted_eigenvalues(m)?[1].norm()
    };
    let kappa = v.norm();
    let w2 = u.iter().zip(v.iter()).map(|(ui, vi)| ui * ui * vi * vi).sum();

    let at = m.transpose();
    let henrici = (m * &at - &at * m).norm();

    // alpha_r with the UH convention f_u = 1, f_v = v^2.
    let v2 = kappa * kappa;
    let mut alpha = Vec::with_capacity(r_max);
    let mut power = m.clone();
    for r in 1..=r_max {
        let sum_sq: f64 = power.iter().map(|x| x * x).sum();
        alpha.push(sum_sq / (v2 * lambda.powi(2 * r as i32)));
        if r < r_max {
            power = &power * m;
        }
    }

    Ok(SpectralSummary {
        lambda,
        lambda2_abs,
        gap: lambda - lambda2_abs,
        u,
        v,
        kappa,
        w2,
        henrici,
        alpha,
    })
}

/// Matrix 2-norm, (rho(A A^T))^{1/2}; always at least the spectral radius.
pub fn matrix_two_norm(a: &MatrixSpec) -> f64 {
    two_norm_dmatrix(a.as_dmatrix())
}

pub(crate) fn two_norm_dmatrix(m: &DMatrix<f64>) -> f64 {
    let gram = m * m.transpose();
    let eig = gram.symmetric_eigen();
    eig.eigenvalues.iter().fold(0.0f64, |acc, &x| acc.max(x)).max(0.0).sqrt()
}

/// Relative Frobenius error of the rank-1 power approximation
/// A^p ~ lambda^p u v^T.
pub fn rank1_power_error(a: &MatrixSpec, p: usize) -> Result<f64> {
    if p == 0 {
        return Err(Error::InvalidParameter("power must be >= 1".into()));
    }
    let (lambda, u, v) = dominant_triple(a)?;
    let m = a.as_dmatrix();
    let mut power = m.clone();
    for _ in 1..p {
        power = &power * m;
    }
    let rank1 = &u * v.transpose() * lambda.powi(p as i32);
    let denom = power.norm();
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((power - rank1).norm() / denom)
}

/// Residual of the eigenvector-angle identity
/// v^2 = 1 - sum_{i != 1} (u . e_i^R)(v . e_i^L),
/// using the full (complex) eigen-decomposition. Small residuals validate
/// the decomposition; failure to separate eigenvalues is `DefectiveMatrix`.
pub fn angle_decomposition_check(a: &MatrixSpec) -> Result<f64> {
    let (lambda, u, v) = dominant_triple(a)?;
    let m = a.as_dmatrix();
    let n = a.dim();
    if n == 1 {
        return Ok(0.0);
    }
    let scale = matrix_scale(m);
    let eig = sorted_eigenvalues(m)?;

    // Pairwise separation is what inverse iteration needs to converge on a
    // single eigenvector; treat near-coincident eigenvalues as defective.
    for i in 0..n {
        for j in (i + 1)..n {
            if (eig[i] - eig[j]).norm() < 1e-8 * scale {
                return Err(Error::DefectiveMatrix(format!(
                    "eigenvalues {} and {} coincide within tolerance",
                    eig[i], eig[j]
                )));
            }
        }
    }

    let mc = m.map(|x| Complex::new(x, 0.0));
    let mct = mc.transpose();
    let uc = u.map(|x| Complex::new(x, 0.0));
    let vc = v.map(|x| Complex::new(x, 0.0));

    let mut sum = Complex::new(0.0, 0.0);
    for ev in eig.iter().skip(1) {
        let right = complex_inverse_iteration(&mc, *ev, scale)?;
        let mut left = complex_inverse_iteration(&mct, *ev, scale)?;
        // Biorthogonal scaling uses the unconjugated product.
        let lr = plain_dot(&left, &right);
        if lr.norm() < 1e-12 {
            return Err(Error::DefectiveMatrix(format!(
                "left/right eigenvectors at {ev} are orthogonal"
            )));
        }
        left /= lr;
        sum += plain_dot(&uc, &right) * plain_dot(&vc, &left);
    }
    let v2 = v.norm_squared();
    let _ = lambda;
    Ok((Complex::new(v2 - 1.0, 0.0) + sum).norm())
}

fn plain_dot(a: &DVector<Complex<f64>>, b: &DVector<Complex<f64>>) -> Complex<f64> {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn complex_inverse_iteration(
    a: &DMatrix<Complex<f64>>,
    lambda: Complex<f64>,
    scale: f64,
) -> Result<DVector<Complex<f64>>> {
    let n = a.nrows();
    let mut shift = Complex::new(0.0, 0.0);
    for attempt in 0..6 {
        let shifted = a - DMatrix::identity(n, n) * (lambda + shift);
        let lu = shifted.lu();
        let mut x = DVector::from_fn(n, |i, _| {
            Complex::new(1.0 + 0.137 * (i as f64 + 1.0), 0.211 * (i as f64 + 0.5))
        });
        x /= Complex::new(x.norm(), 0.0);
        let mut best: Option<(f64, DVector<Complex<f64>>)> = None;
        for _ in 0..64 {
            let Some(mut y) = lu.solve(&x) else { break };
            let ny = y.norm();
            if !ny.is_finite() || ny == 0.0 {
                break;
            }
            y /= Complex::new(ny, 0.0);
            let residual = (a * &y - &y * lambda).norm();
            if best.as_ref().is_none_or(|(r, _)| residual < *r) {
                best = Some((residual, y.clone()));
            }
            if residual <= EIGENVECTOR_TOL * scale {
                break;
            }
            x = y;
        }
        if let Some((residual, y)) = best {
            if residual <= 1e-7 * scale {
                return Ok(y);
            }
        }
        shift = Complex::new(scale * 1e-13 * 10f64.powi(attempt), 0.0);
    }
    Err(Error::DefectiveMatrix(format!(
        "complex inverse iteration stalled at {lambda}"
    )))
}
