//! Composition of every second-moment route into one stability report.

use serde::Serialize;

use crate::analytic::{
    critical_value, iteration_l2, large_noise_l2, perturbation_lp, CriticalReport,
    LyapunovEstimate,
};
use crate::dynamics::{
    estimate_moments, exact_l2, fit_lyapunov, LyapunovFit, MomentSeries, SystemSpec,
};
use crate::error::Result;
use crate::noise::epsilon_squared;
use crate::spectral::spectral_summary;
use crate::structure::{classify, Classification};

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub lambda: f64,
    pub lambda2_abs: f64,
    pub kappa: f64,
    pub w2: f64,
    pub eps2: f64,
    /// Monte Carlo fit of L2 over the requested window.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2_mc: Option<LyapunovFit>,
    /// Exact covariance-operator exponent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2_exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2_perturbation: Option<LyapunovEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2_iteration: Option<LyapunovEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2_large_noise: Option<LyapunovEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical: Option<CriticalReport>,
    /// Nonnegative systems carry their reduction verdict.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<Classification>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct ReportParams {
    pub t_max: usize,
    pub runs: usize,
    pub seed: u64,
    pub fit_window: (usize, usize),
    pub iteration_order: usize,
}

/// Runs every applicable method on the system. Methods outside their
/// domain degrade to warnings rather than failing the report.
pub fn stability_report(
    sys: &SystemSpec,
    params: &ReportParams,
) -> Result<(StabilityReport, MomentSeries)> {
    sys.validate()?;
    let summary = spectral_summary(&sys.a, params.iteration_order.max(1))?;
    let stats = epsilon_squared(&sys.noise, &summary, &sys.a)?;
    let mut warnings = Vec::new();
    if let Some(w) = sys.x0_orthogonality_warning(&summary) {
        warnings.push(w);
    }

    let series = estimate_moments(sys, &[1, 2], params.t_max, params.runs, params.seed)?;
    let l2_mc = match fit_lyapunov(&series, 2, params.fit_window) {
        Ok(fit) => {
            if fit.l_p > 0.0 {
                warnings.push(
                    "fitted L2 > 0: fixed-size ensembles underestimate divergent moments at \
                     large t; trust the exact operator value over the tail of the fit"
                        .into(),
                );
            }
            Some(fit)
        }
        Err(e) => {
            warnings.push(format!("Monte Carlo fit unavailable: {e}"));
            None
        }
    };

    let l2_exact = match exact_l2(sys) {
        Ok(v) => Some(v),
        Err(e) => {
            warnings.push(format!("exact operator exponent unavailable: {e}"));
            None
        }
    };

    let l2_perturbation = match perturbation_lp(&summary, &stats, 2) {
        Ok(p) => Some(p.estimate),
        Err(e) => {
            warnings.push(format!("perturbation estimate unavailable: {e}"));
            None
        }
    };

    let l2_iteration = match iteration_l2(&summary, &stats, &sys.noise, params.iteration_order) {
        Ok(v) => Some(v),
        Err(e) => {
            warnings.push(format!("iteration estimate unavailable: {e}"));
            None
        }
    };

    let l2_large_noise = match large_noise_l2(&summary, &stats, &sys.noise) {
        Ok(v) => Some(v),
        Err(e) => {
            warnings.push(format!("large-noise estimate unavailable: {e}"));
            None
        }
    };

    let critical = match critical_value(&sys.a, &summary, &stats, &sys.noise, params.seed) {
        Ok(c) => Some(c),
        Err(e) => {
            warnings.push(format!("critical value unavailable: {e}"));
            None
        }
    };

    let classification: Option<Classification> =
        if sys.a.is_nonnegative() { classify(&sys.a).ok() } else { None };

    let report = StabilityReport {
        lambda: summary.lambda,
        lambda2_abs: summary.lambda2_abs,
        kappa: summary.kappa,
        w2: summary.w2,
        eps2: stats.eps2,
        l2_mc,
        l2_exact,
        l2_perturbation,
        l2_iteration,
        l2_large_noise,
        critical,
        classification,
        warnings,
    };
    Ok((report, series))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::matrix::MatrixSpec;
    use crate::noise::NoiseModel;

    #[test]
    fn report_populates_every_route_for_uh() {
        let sys = SystemSpec::new(
            fixtures::well_behaved_5x5(),
            NoiseModel::uh(0.01),
            vec![1.0; 5],
        )
        .unwrap();
        let params = ReportParams {
            t_max: 20,
            runs: 2000,
            seed: 5,
            fit_window: (4, 20),
            iteration_order: 4,
        };
        let (report, series) = stability_report(&sys, &params).unwrap();
        assert!(report.l2_mc.is_some());
        assert!(report.l2_exact.is_some());
        assert!(report.l2_perturbation.is_some());
        assert!(report.l2_iteration.is_some());
        assert!(report.l2_large_noise.is_some());
        assert!(report.critical.is_some());
        assert!(matches!(
            report.classification,
            Some(crate::structure::Classification::Primitive)
        ));
        assert_eq!(series.times.len(), 21);
        // All analytic routes near the exact operator for this benign case.
        let exact = report.l2_exact.unwrap();
        assert!((report.l2_perturbation.unwrap().value - exact).abs() < 0.02);
        assert!((report.l2_iteration.unwrap().value - exact).abs() < 0.02);
    }

    #[test]
    fn divergent_fit_carries_heavy_tail_warning() {
        let sys = SystemSpec::new(
            MatrixSpec::scalar(0.9).unwrap(),
            NoiseModel::uh(0.5),
            vec![1.0],
        )
        .unwrap();
        let params = ReportParams {
            t_max: 15,
            runs: 3000,
            seed: 6,
            fit_window: (2, 15),
            iteration_order: 1,
        };
        let (report, _) = stability_report(&sys, &params).unwrap();
        assert!(report.l2_mc.unwrap().l_p > 0.0);
        assert!(report.warnings.iter().any(|w| w.contains("underestimate divergent moments")));
    }

    #[test]
    fn sp_noise_degrades_gracefully() {
        let a = MatrixSpec::from_rows(&[vec![0.4, 0.1], vec![0.1, 0.3]]).unwrap();
        let sys = SystemSpec::new(a, NoiseModel::sp(0.2), vec![1.0, 1.0]).unwrap();
        let params = ReportParams {
            t_max: 10,
            runs: 500,
            seed: 7,
            fit_window: (2, 10),
            iteration_order: 2,
        };
        let (report, _) = stability_report(&sys, &params).unwrap();
        assert!(report.l2_exact.is_none());
        assert!(report.l2_iteration.is_none());
        assert!(report.l2_perturbation.is_some());
        assert!(!report.warnings.is_empty());
    }
}
