//! Scalar (n = 1) moments, the noise-only limit, and the continuous
//! mean-value cross-check.

use serde::Serialize;

use super::{lp_small_noise, noise_only_value, LyapunovEstimate, Method};
use crate::error::{Error, Result};
use crate::matrix::MatrixSpec;
use crate::noise::NoiseModel;

fn binomial(p: u32, k: u32) -> f64 {
    let mut c = 1.0f64;
    for i in 0..k {
        c = c * f64::from(p - i) / f64::from(i + 1);
    }
    c
}

/// Exact scalar moment <x_t^p> = x0^p a^{pt} (sum_k C(p,k) m_k)^t, with
/// m_k = <(b/a)^k> supplied for k = 1..p and the k = 0 term included.
pub fn scalar_moment_exact(a: f64, moment_ratios: &[f64], p: u32, t: usize, x0: f64) -> Result<f64> {
    if moment_ratios.len() < p as usize {
        return Err(Error::InvalidParameter(format!(
            "need <(b/a)^k> for k = 1..{p}, got {}",
            moment_ratios.len()
        )));
    }
    let mut step = 1.0; // k = 0 term
    for k in 1..=p {
        step += binomial(p, k) * moment_ratios[(k - 1) as usize];
    }
    Ok(x0.powi(p as i32) * a.powi((p as i32) * (t as i32)) * step.powi(t as i32))
}

/// <(b/a)^k> for k = 1..p with b centered normal of variance b2:
/// odd moments vanish, even are (k-1)!! b^k.
pub fn normal_moment_ratios(a: f64, b2: f64, p: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(p as usize);
    for k in 1..=p {
        if k % 2 == 1 {
            out.push(0.0);
        } else {
            let mut m = 1.0;
            let mut i = k - 1;
            while i >= 2 {
                m *= f64::from(i);
                i -= 2;
            }
            out.push(m * b2.powi((k / 2) as i32) / a.powi(k as i32));
        }
    }
    out
}

/// <(b/a)^k> with b uniform on [-c, c], c = sqrt(3 b2):
/// even moments are c^k/(k+1).
pub fn uniform_moment_ratios(a: f64, b2: f64, p: u32) -> Vec<f64> {
    let c = (3.0 * b2).sqrt();
    (1..=p)
        .map(|k| {
            if k % 2 == 1 {
                0.0
            } else {
                c.powi(k as i32) / f64::from(k + 1) / a.powi(k as i32)
            }
        })
        .collect()
}

/// Small-noise scalar approximation L_p = p log a + p(p-1)(b/a)^2/2.
pub fn scalar_lp_approx(a: f64, b2: f64, p: u32) -> Result<LyapunovEstimate> {
    if a <= 0.0 {
        return Err(Error::InvalidParameter("scalar gain a must be positive".into()));
    }
    let value = lp_small_noise(a.ln(), b2 / (a * a), p);
    let mut est = LyapunovEstimate::new(Method::ScalarApprox, p, value);
    let ratio = b2.sqrt() / a;
    if ratio > 0.3 {
        est = est.with_note(format!(
            "b/a = {ratio:.3} is outside the small-noise regime; error grows as (b/a)^3"
        ));
    } else {
        est = est.with_note("error O((b/a)^4) for symmetric element distributions".to_string());
    }
    Ok(est)
}

/// Second-moment exponent of the pure-noise system (A = 0):
/// L2 = log(n^k b^2), k = 1 for independent and 2 for totally correlated
/// elements.
pub fn noise_only_l2(model: &NoiseModel, n: usize) -> Result<LyapunovEstimate> {
    model.validate()?;
    let (k, b2) = match *model {
        NoiseModel::Uh { b2, .. } => (1, b2),
        NoiseModel::T { b2, .. } => (2, b2),
        _ => {
            return Err(Error::UnsupportedNoise(format!(
                "noise-only closed form covers UH and T, not {}",
                model.kind_name()
            )))
        }
    };
    Ok(LyapunovEstimate::new(Method::LargeNoise, 2, noise_only_value(n, k, b2)))
}

/// Unequal-variance generalization: b^2 replaced by the average of all
/// n^2 element variances.
pub fn noise_only_l2_average(variances: &MatrixSpec, correlated: bool) -> LyapunovEstimate {
    let n = variances.dim();
    let b2_bar = variances.element_mean();
    let k = if correlated { 2 } else { 1 };
    LyapunovEstimate::new(Method::LargeNoise, 2, noise_only_value(n, k, b2_bar))
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuousComparison {
    /// Continuous-time mean-value result l_p = -p delta + p(p-1) n^2 b^2 / 2.
    pub continuous: f64,
    /// Discrete counterpart with the (1 - 2 delta) factor on the noise term.
    pub discrete: f64,
    pub delta: f64,
}

/// Mean-value-limit cross-check between the continuous and discrete
/// moment exponents, with lambda = n a = 1 - delta and T noise.
pub fn continuous_mva_lp(n: usize, a: f64, b2: f64, p: u32) -> ContinuousComparison {
    let nf = n as f64;
    let pf = f64::from(p);
    let delta = 1.0 - nf * a;
    let noise = pf * (pf - 1.0) * nf * nf * b2 / 2.0;
    ContinuousComparison {
        continuous: -pf * delta + noise,
        discrete: -pf * delta + noise * (1.0 - 2.0 * delta),
        delta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn first_moment_is_noise_free() {
        let m = normal_moment_ratios(0.97, 0.05, 1);
        let v = scalar_moment_exact(0.97, &m, 1, 12, 2.0).unwrap();
        assert_relative_eq!(v, 2.0 * 0.97f64.powi(12), max_relative = 1e-13);
    }

    #[test]
    fn second_moment_closed_form() {
        // p = 2 collapses to (a^2 + b^2)^t for any centered noise.
        let (a, b2) = (0.97, 0.05);
        for t in [1usize, 7, 30] {
            let m = normal_moment_ratios(a, b2, 2);
            let v = scalar_moment_exact(a, &m, 2, t, 1.0).unwrap();
            assert_relative_eq!(v, (a * a + b2).powi(t as i32), max_relative = 1e-12);
            let mu = uniform_moment_ratios(a, b2, 2);
            let v = scalar_moment_exact(a, &mu, 2, t, 1.0).unwrap();
            assert_relative_eq!(v, (a * a + b2).powi(t as i32), max_relative = 1e-12);
        }
    }

    #[test]
    fn fourth_moment_against_direct_expectation() {
        // Independent oracle: <(a+b)^4> expanded with normal moments
        // <b^2> = b^2, <b^4> = 3 b^4.
        let (a, b2) = (0.9f64, 0.04f64);
        let per_step = a.powi(4) + 6.0 * a * a * b2 + 3.0 * b2 * b2;
        let m = normal_moment_ratios(a, b2, 4);
        for t in [1usize, 5, 9] {
            let v = scalar_moment_exact(a, &m, 4, t, 1.0).unwrap();
            assert_relative_eq!(v, per_step.powi(t as i32), max_relative = 1e-12);
        }
    }

    #[test]
    fn approx_matches_exact_to_second_order() {
        let (a, b2) = (0.97, 0.05);
        let approx = scalar_lp_approx(a, b2, 2).unwrap().value;
        let exact = (a * a + b2).ln();
        // Agreement to second order in b/a: difference is O((b/a)^4).
        let ratio2 = b2 / (a * a);
        assert!((approx - exact).abs() < ratio2 * ratio2);
        // Third moment diverges for this system.
        let l3 = scalar_lp_approx(a, b2, 3).unwrap().value;
        assert!(l3 > 0.0);
        // p = 1 reduces to log a.
        assert_eq!(scalar_lp_approx(a, b2, 1).unwrap().value, a.ln());
    }

    #[test]
    fn noise_only_values() {
        let l = noise_only_l2(&NoiseModel::uh(0.25), 3).unwrap();
        assert_relative_eq!(l.value, 0.75f64.ln(), max_relative = 1e-15);
        let l = noise_only_l2(&NoiseModel::t(0.25), 3).unwrap();
        assert_relative_eq!(l.value, 2.25f64.ln(), max_relative = 1e-15);
        assert!(noise_only_l2(&NoiseModel::sh(0.25), 3).is_err());
        // Unequal variances use the element average.
        let vars = MatrixSpec::from_rows(&[vec![0.1, 0.3], vec![0.2, 0.4]]).unwrap();
        let l = noise_only_l2_average(&vars, false);
        assert_relative_eq!(l.value, (2.0 * 0.25f64).ln(), max_relative = 1e-15);
    }

    proptest::proptest! {
        /// p = 2 exact moments collapse to (a^2 + b^2)^t for any centered
        /// element distribution.
        #[test]
        fn second_moment_identity(
            a in 0.1f64..1.5,
            b2 in 0.0f64..0.4,
            t in 0usize..40,
            uniform in proptest::bool::ANY,
        ) {
            let m = if uniform {
                uniform_moment_ratios(a, b2, 2)
            } else {
                normal_moment_ratios(a, b2, 2)
            };
            let v = scalar_moment_exact(a, &m, 2, t, 1.0).unwrap();
            let expected = (a * a + b2).powi(t as i32);
            proptest::prop_assert!((v - expected).abs() <= 1e-10 * expected.max(1e-300));
        }
    }

    #[test]
    fn continuous_comparison() {
        // p = 1: l_1 = -delta.
        let c = continuous_mva_lp(5, 0.196, 0.001, 1);
        assert_relative_eq!(c.continuous, -c.delta, max_relative = 1e-12);
        // delta = 0: pure noise growth.
        let c = continuous_mva_lp(5, 0.2, 0.001, 3);
        assert_relative_eq!(c.continuous, 3.0 * 2.0 * 25.0 * 0.001 / 2.0, max_relative = 1e-12);
        // Documented first-order difference 2 delta n^2 b^2 at p = 2.
        let (n, delta, b2) = (5usize, 0.02, 0.001);
        let a = (1.0 - delta) / n as f64;
        let c = continuous_mva_lp(n, a, b2, 2);
        let diff = (c.continuous - c.discrete).abs();
        assert_relative_eq!(diff, 2.0 * delta * 25.0 * b2, max_relative = 1e-9);
    }
}
