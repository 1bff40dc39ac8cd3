//! Monte Carlo simulation of x^t = (A + B^t) x^{t-1} and the exact
//! second-moment propagator used as ground truth.
//!
//! Ensemble runs carry states in log-magnitude + unit-direction form, so
//! divergent moments keep producing finite statistics instead of
//! overflowing. Every run draws its noise from an RNG stream derived from
//! (master seed, run index); results are bit-identical for a fixed seed
//! regardless of how many workers participate.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::MatrixSpec;
use crate::noise::{sample_noise, NoiseModel};
use crate::rng::derive_rng;
use crate::spectral::SpectralSummary;

/// Resamples used for every bootstrap standard error.
pub const BOOTSTRAP_RESAMPLES: usize = 200;
/// Norm beyond which a raw trajectory is truncated with an overflow flag.
const OVERFLOW_NORM: f64 = 1e100;
/// Power-iteration cap for the second-moment operator.
const OPERATOR_ITERATION_CAP: usize = 100_000;
const OPERATOR_TOL: f64 = 1e-13;

/// The full stochastic system: unperturbed matrix, noise model, fixed
/// initial state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemSpec {
    pub a: MatrixSpec,
    pub noise: NoiseModel,
    pub x0: Vec<f64>,
}

impl SystemSpec {
    pub fn new(a: MatrixSpec, noise: NoiseModel, x0: Vec<f64>) -> Result<Self> {
        let sys = Self { a, noise, x0 };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        if self.x0.len() != self.a.dim() {
            return Err(Error::DimensionMismatch(format!(
                "x0 has {} entries for a {}-dimensional system",
                self.x0.len(),
                self.a.dim()
            )));
        }
        if self.x0.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("x0 has a non-finite entry".into()));
        }
        if self.x0.iter().all(|&x| x == 0.0) {
            return Err(Error::InvalidParameter("x0 is the zero vector".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn x0_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x0)
    }

    /// Warns (does not reject) when x0 is nearly orthogonal to the left
    /// dominant eigenvector, where the asymptotic expressions degenerate.
    pub fn x0_orthogonality_warning(&self, summary: &SpectralSummary) -> Option<String> {
        let x0 = self.x0_vector();
        let overlap = summary.v.dot(&x0).abs();
        if overlap < 1e-8 * summary.v.norm() * x0.norm() {
            Some(format!(
                "x0 is nearly orthogonal to the left dominant eigenvector (v.x0 = {overlap:.3e}); \
                 asymptotic predictions do not apply"
            ))
        } else {
            None
        }
    }
}

/// Raw simulated trajectory, truncated if the norm left the floating range.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// States x^0 .. x^t_end.
    pub states: Vec<DVector<f64>>,
    /// Step at which the norm exceeded the floating range, if any.
    pub overflow_at: Option<usize>,
}

/// Simulates one trajectory with fresh noise each step, returning all
/// states. Divergent runs are truncated at the overflow step and flagged.
pub fn simulate_trajectory<R: Rng + ?Sized>(
    sys: &SystemSpec,
    t_max: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    sys.validate()?;
    if t_max < 1 {
        return Err(Error::InvalidParameter("t_max must be >= 1".into()));
    }
    let a = sys.a.as_dmatrix();
    let mut states = Vec::with_capacity(t_max + 1);
    states.push(sys.x0_vector());
    for t in 1..=t_max {
        let b = sample_noise(&sys.noise, &sys.a, rng)?;
        let next = (a + b) * states.last().unwrap();
        if next.norm() > OVERFLOW_NORM {
            return Ok(Trajectory { states, overflow_at: Some(t) });
        }
        states.push(next);
    }
    Ok(Trajectory { states, overflow_at: None })
}

/// One run in log-magnitude + direction form: log|x^t| per step plus the
/// final unit direction.
struct CarrierRun {
    log_norms: Vec<f64>,
    final_dir: DVector<f64>,
}

fn carrier_run<R: Rng + ?Sized>(sys: &SystemSpec, t_max: usize, rng: &mut R) -> Result<CarrierRun> {
    let a = sys.a.as_dmatrix();
    let x0 = sys.x0_vector();
    let norm0 = x0.norm();
    let mut dir = &x0 / norm0;
    let mut log_norm = norm0.ln();
    let mut log_norms = Vec::with_capacity(t_max + 1);
    log_norms.push(log_norm);
    for _ in 1..=t_max {
        let b = sample_noise(&sys.noise, &sys.a, rng)?;
        let y = (a + b) * &dir;
        let ny = y.norm();
        if ny == 0.0 {
            // State collapsed exactly to zero; it stays there.
            dir.fill(0.0);
            while log_norms.len() <= t_max {
                log_norms.push(f64::NEG_INFINITY);
            }
            break;
        }
        log_norm += ny.ln();
        dir = y / ny;
        log_norms.push(log_norm);
    }
    Ok(CarrierRun { log_norms, final_dir: dir })
}

/// Per-time-step ensemble moments with bootstrap errors.
#[derive(Debug, Clone, Serialize)]
pub struct MomentSeries {
    pub times: Vec<usize>,
    pub p_orders: Vec<u32>,
    /// estimates[t][p_idx] = ensemble mean of |x^t|^p.
    pub estimates: Vec<Vec<f64>>,
    /// Bootstrap standard errors, same layout.
    pub stderr: Vec<Vec<f64>>,
    /// Runs excluded at step t (non-finite state), reported not dropped
    /// silently.
    pub flagged: Vec<usize>,
    pub runs: usize,
    pub seed: u64,
    /// Per-replicate bootstrap means, [t][p_idx][replicate]. The same
    /// replicate shares its resampled runs across every t, so fits can
    /// propagate the (strongly time-correlated) ensemble error honestly.
    #[serde(skip)]
    pub bootstrap_estimates: Vec<Vec<Vec<f64>>>,
}

impl MomentSeries {
    pub fn estimate(&self, t: usize, p: u32) -> Option<f64> {
        let pi = self.p_orders.iter().position(|&q| q == p)?;
        self.estimates.get(t).map(|row| row[pi])
    }

    pub fn stderr_at(&self, t: usize, p: u32) -> Option<f64> {
        let pi = self.p_orders.iter().position(|&q| q == p)?;
        self.stderr.get(t).map(|row| row[pi])
    }

    /// CSV form: t,p,estimate,stderr,flagged_runs.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,p,estimate,stderr,flagged_runs\n");
        for (ti, &t) in self.times.iter().enumerate() {
            for (pi, &p) in self.p_orders.iter().enumerate() {
                out.push_str(&format!(
                    "{t},{p},{},{},{}\n",
                    self.estimates[ti][pi], self.stderr[ti][pi], self.flagged[ti]
                ));
            }
        }
        out
    }
}

/// Ensemble moment estimation. Deterministic for a fixed seed no matter
/// how many threads run the ensemble.
pub fn estimate_moments(
    sys: &SystemSpec,
    p_orders: &[u32],
    t_max: usize,
    runs: usize,
    seed: u64,
) -> Result<MomentSeries> {
    sys.validate()?;
    if runs == 0 {
        return Err(Error::InvalidParameter("runs must be >= 1".into()));
    }
    if p_orders.is_empty() {
        return Err(Error::InvalidParameter("p_orders must be nonempty".into()));
    }
    if t_max == 0 {
        return Err(Error::InvalidParameter("t_max must be >= 1".into()));
    }

    let steps = t_max + 1;
    // log|x^t| for every run and step, indexed run * steps + t.
    let mut log_norms = vec![0.0f64; runs * steps];
    log_norms
        .par_chunks_mut(steps)
        .enumerate()
        .try_for_each(|(run, slot)| -> Result<()> {
            let mut rng = derive_rng(seed, "dynamics.run", run as u64);
            let carrier = carrier_run(sys, t_max, &mut rng)?;
            slot.copy_from_slice(&carrier.log_norms);
            Ok(())
        })?;

    // One set of multinomial bootstrap weights, reused across (t, p).
    let counts = bootstrap_counts(runs, seed);

    let x0_norm = sys.x0_vector().norm();
    type StepStats = (Vec<f64>, Vec<f64>, Vec<Vec<f64>>, usize);
    let stats: Vec<StepStats> = (0..steps)
        .into_par_iter()
        .map(|t| {
            if t == 0 {
                let est: Vec<f64> =
                    p_orders.iter().map(|&p| x0_norm.powi(p as i32)).collect();
                let se = vec![0.0; p_orders.len()];
                let boot = est.iter().map(|&e| vec![e; counts.len()]).collect();
                return (est, se, boot, 0);
            }
            let column: Vec<f64> = (0..runs).map(|run| log_norms[run * steps + t]).collect();
            let flagged = column.iter().filter(|x| x.is_nan()).count();
            let mut est = Vec::with_capacity(p_orders.len());
            let mut se = Vec::with_capacity(p_orders.len());
            let mut boot = Vec::with_capacity(p_orders.len());
            for &p in p_orders {
                let (e, s, b) = moment_with_bootstrap(&column, p, &counts);
                est.push(e);
                se.push(s);
                boot.push(b);
            }
            (est, se, boot, flagged)
        })
        .collect();

    let mut estimates = Vec::with_capacity(steps);
    let mut stderr = Vec::with_capacity(steps);
    let mut bootstrap_estimates = Vec::with_capacity(steps);
    let mut flagged = Vec::with_capacity(steps);
    for (e, s, b, f) in stats {
        estimates.push(e);
        stderr.push(s);
        bootstrap_estimates.push(b);
        flagged.push(f);
    }

    Ok(MomentSeries {
        times: (0..steps).collect(),
        p_orders: p_orders.to_vec(),
        estimates,
        stderr,
        flagged,
        runs,
        seed,
        bootstrap_estimates,
    })
}

fn bootstrap_counts(runs: usize, seed: u64) -> Vec<Vec<u8>> {
    let mut rng = derive_rng(seed, "dynamics.bootstrap", 0);
    (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let mut counts = vec![0u8; runs];
            for _ in 0..runs {
                let idx = rng.gen_range(0..runs);
                counts[idx] = counts[idx].saturating_add(1);
            }
            counts
        })
        .collect()
}

/// Mean of exp(p * log-norm) over runs, in a shifted exponential scale so
/// that divergent moments stay finite, plus its bootstrap error and the
/// per-replicate bootstrap means.
fn moment_with_bootstrap(
    log_norms: &[f64],
    p: u32,
    counts: &[Vec<u8>],
) -> (f64, f64, Vec<f64>) {
    let runs = log_norms.len();
    let pf = f64::from(p);
    let mut m = f64::NEG_INFINITY;
    for &s in log_norms {
        if s.is_finite() && pf * s > m {
            m = pf * s;
        }
    }
    if m == f64::NEG_INFINITY {
        // Every run collapsed to zero.
        return (0.0, 0.0, vec![0.0; counts.len()]);
    }
    let weights: Vec<f64> = log_norms
        .iter()
        .map(|&s| if s.is_nan() { 0.0 } else { (pf * s - m).exp() })
        .collect();
    let valid = log_norms.iter().filter(|x| !x.is_nan()).count().max(1);
    let scale = m.exp();
    let mean = scale * weights.iter().sum::<f64>() / valid as f64;

    let mut boot = Vec::with_capacity(counts.len());
    for c in counts {
        let mut acc = 0.0;
        for (w, &k) in weights.iter().zip(c.iter()) {
            acc += f64::from(k) * w;
        }
        boot.push(scale * acc / runs as f64);
    }
    let bmean = boot.iter().sum::<f64>() / boot.len() as f64;
    let var = boot.iter().map(|x| (x - bmean) * (x - bmean)).sum::<f64>()
        / (boot.len() - 1) as f64;
    (mean, var.sqrt(), boot)
}

/// A fitted moment Lyapunov exponent over a caller-chosen window.
#[derive(Debug, Clone, Serialize)]
pub struct LyapunovFit {
    pub p: u32,
    pub l_p: f64,
    /// 95% half-width from stderr propagation through the fit weights.
    pub ci: f64,
    pub window: (usize, usize),
}

fn ols_slope(ts: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = ts.len() as f64;
    let t_bar = ts.iter().sum::<f64>() / n;
    let stt: f64 = ts.iter().map(|t| (t - t_bar) * (t - t_bar)).sum();
    let y_bar = ys.iter().sum::<f64>() / n;
    let slope = ts
        .iter()
        .zip(ys.iter())
        .map(|(t, y)| (t - t_bar) * (y - y_bar))
        .sum::<f64>()
        / stt;
    (slope, t_bar, stt)
}

/// Least-squares slope of log estimate versus t over `window` (inclusive).
/// The window is never auto-selected: transients vary too much between
/// systems for any default to be safe.
///
/// The half-width comes from refitting every bootstrap replicate of the
/// series, which keeps the strong time correlation of ensemble errors
/// (the same runs feed every t); series without stored replicates fall
/// back to per-point stderr propagation, which assumes independence and
/// understates the width.
pub fn fit_lyapunov(series: &MomentSeries, p: u32, window: (usize, usize)) -> Result<LyapunovFit> {
    let (lo, hi) = window;
    if hi < lo + 4 {
        return Err(Error::DegenerateWindow(format!(
            "window [{lo},{hi}] has fewer than 5 points"
        )));
    }
    if hi >= series.times.len() {
        return Err(Error::DegenerateWindow(format!(
            "window end {hi} outside series range {}",
            series.times.len() - 1
        )));
    }
    let pi = series
        .p_orders
        .iter()
        .position(|&q| q == p)
        .ok_or_else(|| Error::InvalidParameter(format!("order {p} not in series")))?;

    let mut ts = Vec::new();
    let mut ys = Vec::new();
    let mut sigmas = Vec::new();
    for t in lo..=hi {
        let e = series.estimates[t][pi];
        if !(e.is_finite() && e > 0.0) || series.flagged[t] > 0 {
            return Err(Error::DegenerateWindow(format!(
                "estimate at t = {t} is nonpositive or flagged"
            )));
        }
        ts.push(t as f64);
        ys.push(e.ln());
        // Delta method: sd of log estimate.
        sigmas.push(series.stderr[t][pi] / e);
    }
    let (slope, t_bar, stt) = ols_slope(&ts, &ys);

    let replicate_slopes: Vec<f64> = if series.bootstrap_estimates.len() == series.times.len() {
        let n_boot = series.bootstrap_estimates[lo][pi].len();
        (0..n_boot)
            .filter_map(|b| {
                let ys_b: Option<Vec<f64>> = (lo..=hi)
                    .map(|t| {
                        let e = series.bootstrap_estimates[t][pi][b];
                        (e.is_finite() && e > 0.0).then(|| e.ln())
                    })
                    .collect();
                ys_b.map(|ys_b| ols_slope(&ts, &ys_b).0)
            })
            .collect()
    } else {
        Vec::new()
    };

    let ci = if replicate_slopes.len() >= 50 {
        let m = replicate_slopes.iter().sum::<f64>() / replicate_slopes.len() as f64;
        let var = replicate_slopes.iter().map(|s| (s - m) * (s - m)).sum::<f64>()
            / (replicate_slopes.len() - 1) as f64;
        1.96 * var.sqrt()
    } else {
        let var_slope: f64 = ts
            .iter()
            .zip(sigmas.iter())
            .map(|(t, s)| {
                let w = (t - t_bar) / stt;
                w * w * s * s
            })
            .sum();
        1.96 * var_slope.sqrt()
    };
    Ok(LyapunovFit { p, l_p: slope, ci, window })
}

/// Applies the model's covariance contribution N(Sigma) for one step.
fn noise_map(model: &NoiseModel, a: &MatrixSpec, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.dim();
    match *model {
        NoiseModel::Uh { b2, .. } => Ok(DMatrix::identity(n, n) * (b2 * sigma.trace())),
        NoiseModel::Sh { b2, .. } => {
            if !a.is_symmetric(1e-12) {
                return Err(Error::AsymmetricSystem);
            }
            Ok(DMatrix::identity(n, n) * (b2 * sigma.trace()) + sigma * b2)
        }
        NoiseModel::T { b2, .. } => {
            let s: f64 = sigma.iter().sum();
            Ok(DMatrix::from_element(n, n, b2 * s))
        }
        NoiseModel::Up { q, dist, .. } => {
            let f = dist.factor();
            let mut d = DMatrix::zeros(n, n);
            for i in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += a.entry(i, k).powi(2) * sigma[(k, k)];
                }
                d[(i, i)] = f * q * q * acc;
            }
            Ok(d)
        }
        NoiseModel::Sp { .. } => Err(Error::UnsupportedNoise(
            "SP noise has no supported covariance propagator".into(),
        )),
    }
}

fn covariance_step(sys: &SystemSpec, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let a = sys.a.as_dmatrix();
    let mut next = a * sigma * a.transpose() + noise_map(&sys.noise, &sys.a, sigma)?;
    // Sigma stays symmetric in exact arithmetic; stop rounding drift.
    let sym = (&next + next.transpose()) * 0.5;
    next = sym;
    Ok(next)
}

/// Propagates Sigma^t = E[x^t (x^t)^T] exactly and returns the series
/// tr(Sigma^t) = <|x^t|^2> for t = 0..t_max.
pub fn exact_second_moment(sys: &SystemSpec, t_max: usize) -> Result<Vec<f64>> {
    sys.validate()?;
    let x0 = sys.x0_vector();
    let mut sigma = &x0 * x0.transpose();
    let mut out = Vec::with_capacity(t_max + 1);
    out.push(sigma.trace());
    for _ in 1..=t_max {
        sigma = covariance_step(sys, &sigma)?;
        out.push(sigma.trace());
    }
    Ok(out)
}

/// The exact second-moment Lyapunov exponent: log of the spectral radius
/// of Sigma -> A Sigma A^T + N(Sigma), by power iteration on the map.
/// This is the oracle every approximation is graded against.
pub fn exact_l2(sys: &SystemSpec) -> Result<f64> {
    sys.noise.validate()?;
    let n = sys.dim();
    let mut sigma = DMatrix::<f64>::identity(n, n);
    sigma /= sigma.norm();
    let mut mu_prev = f64::NAN;
    for iter in 0..OPERATOR_ITERATION_CAP {
        let next = covariance_step(sys, &sigma)?;
        let mu = next.norm();
        if mu == 0.0 {
            // The operator annihilated the cone (A = 0 and no noise).
            return Ok(f64::NEG_INFINITY);
        }
        let next = next / mu;
        let settled = (mu - mu_prev).abs() <= OPERATOR_TOL * mu.max(1e-300)
            && (&next - &sigma).norm() <= 1e-10;
        sigma = next;
        mu_prev = mu;
        if settled {
            let _ = iter;
            return Ok(mu.ln());
        }
    }
    Err(Error::NonConvergence {
        iterations: OPERATOR_ITERATION_CAP,
        residual: mu_prev,
    })
}

/// Log of the first state component normalized by its expectation, with a
/// Gaussian moment fit. Runs whose component crossed zero are excluded and
/// counted.
#[derive(Debug, Clone, Serialize)]
pub struct LogStateHistogram {
    pub samples: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    /// Runs excluded because x^t_1 <= 0 (sign flip against the mean).
    pub excluded: usize,
    pub t: usize,
    pub runs: usize,
}

pub fn log_state_histogram(
    sys: &SystemSpec,
    t: usize,
    runs: usize,
    seed: u64,
) -> Result<LogStateHistogram> {
    sys.validate()?;
    if t == 0 || runs == 0 {
        return Err(Error::InvalidParameter("t and runs must be >= 1".into()));
    }
    // Expected value evolves as the unperturbed system.
    let mut expected = sys.x0_vector();
    for _ in 0..t {
        expected = sys.a.as_dmatrix() * expected;
    }
    let e1 = expected[0];
    if e1 == 0.0 || !e1.is_finite() {
        return Err(Error::InvalidParameter(
            "first component of the expected state vanishes".into(),
        ));
    }
    let log_e1 = e1.abs().ln();
    let sign_e1 = e1.signum();

    let per_run: Vec<Option<f64>> = (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = derive_rng(seed, "dynamics.histogram", run as u64);
            let carrier = carrier_run(sys, t, &mut rng).ok()?;
            let s = *carrier.log_norms.last().unwrap();
            let d1 = carrier.final_dir[0];
            if !s.is_finite() || d1 * sign_e1 <= 0.0 {
                return None;
            }
            Some(s + d1.abs().ln() - log_e1)
        })
        .collect();

    let samples: Vec<f64> = per_run.iter().flatten().copied().collect();
    let excluded = runs - samples.len();
    if samples.len() < 2 {
        return Err(Error::DegenerateWindow(
            "fewer than two runs kept a positive first component".into(),
        ));
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
        / (samples.len() - 1) as f64;
    Ok(LogStateHistogram { samples, mean, sd: var.sqrt(), excluded, t, runs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_relative_eq;

    fn scalar_system(a: f64, noise: NoiseModel) -> SystemSpec {
        SystemSpec::new(MatrixSpec::scalar(a).unwrap(), noise, vec![1.0]).unwrap()
    }

    #[test]
    fn zero_noise_reproduces_matrix_powers() {
        let a = fixtures::well_behaved_5x5();
        let sys = SystemSpec::new(a.clone(), NoiseModel::uh(0.0), vec![1.0; 5]).unwrap();
        let mut rng = derive_rng(1, "test.dyn", 0);
        let traj = simulate_trajectory(&sys, 10, &mut rng).unwrap();
        let mut expected = sys.x0_vector();
        for t in 0..=10usize {
            assert!((traj.states[t].clone() - &expected).norm() < 1e-12 * expected.norm());
            expected = a.as_dmatrix() * expected;
        }
    }

    #[test]
    fn scalar_mean_tracks_unperturbed() {
        // <x_t> = a^t x_0 regardless of the noise.
        let sys = scalar_system(0.97, NoiseModel::uh(0.05));
        let runs = 20_000;
        let t_max = 20;
        let mut sums = vec![0.0; t_max + 1];
        let mut sq = vec![0.0; t_max + 1];
        for run in 0..runs {
            let mut rng = derive_rng(2, "test.dyn.mean", run);
            let traj = simulate_trajectory(&sys, t_max, &mut rng).unwrap();
            for t in 0..=t_max {
                sums[t] += traj.states[t][0];
                sq[t] += traj.states[t][0] * traj.states[t][0];
            }
        }
        for t in [5, 10, 20] {
            let mean = sums[t] / runs as f64;
            let var = sq[t] / runs as f64 - mean * mean;
            let se = (var / runs as f64).sqrt();
            let expected = 0.97f64.powi(t as i32);
            assert!(
                (mean - expected).abs() <= 3.0 * se,
                "t={t}: mean {mean} vs {expected} (se {se})"
            );
        }
    }

    #[test]
    fn scalar_second_moment_matches_exact_formula() {
        let sys = scalar_system(0.97, NoiseModel::uh(0.05));
        let series = estimate_moments(&sys, &[2], 30, 30_000, 42).unwrap();
        for t in [1usize, 10, 20, 30] {
            let exact = 0.9909f64.powi(t as i32);
            let est = series.estimate(t, 2).unwrap();
            let se = series.stderr_at(t, 2).unwrap();
            assert!(
                (est - exact).abs() <= 3.0 * se,
                "t={t}: {est} vs {exact} (se {se})"
            );
        }
        // t = 0 entry is |x0|^p exactly.
        assert_eq!(series.estimate(0, 2).unwrap(), 1.0);
        assert_eq!(series.stderr_at(0, 2).unwrap(), 0.0);
    }

    #[test]
    fn noise_only_multiplies_expected_square_norm_by_nb2() {
        let n = 3;
        let b2 = 0.25;
        let a = MatrixSpec::from_rows(&vec![vec![0.0; n]; n]).unwrap();
        let sys = SystemSpec::new(a, NoiseModel::uh(b2), vec![1.0; n]).unwrap();
        let tr = exact_second_moment(&sys, 20).unwrap();
        for (t, &v) in tr.iter().enumerate() {
            let expected = (n as f64 * b2).powi(t as i32) * n as f64;
            assert_relative_eq!(v, expected, max_relative = 1e-12);
        }
        let sys_t = SystemSpec::new(
            MatrixSpec::from_rows(&vec![vec![0.0; n]; n]).unwrap(),
            NoiseModel::t(b2),
            vec![1.0; n],
        )
        .unwrap();
        let tr = exact_second_moment(&sys_t, 20).unwrap();
        for (t, &v) in tr.iter().enumerate() {
            let expected = ((n * n) as f64 * b2).powi(t as i32) * n as f64;
            assert_relative_eq!(v, expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn scalar_propagator_is_exact() {
        let sys = scalar_system(0.9, NoiseModel::uh(0.02));
        let tr = exact_second_moment(&sys, 15).unwrap();
        for (t, &v) in tr.iter().enumerate() {
            assert_relative_eq!(v, 0.83f64.powi(t as i32), max_relative = 1e-13);
        }
        assert_relative_eq!(exact_l2(&sys).unwrap(), 0.83f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn exact_l2_noise_only_limits() {
        let n = 3;
        let a = MatrixSpec::from_rows(&vec![vec![0.0; n]; n]).unwrap();
        let uh = SystemSpec::new(a.clone(), NoiseModel::uh(0.25), vec![1.0; n]).unwrap();
        assert_relative_eq!(exact_l2(&uh).unwrap(), 0.75f64.ln(), max_relative = 1e-11);
        let t = SystemSpec::new(a, NoiseModel::t(0.25), vec![1.0; n]).unwrap();
        assert_relative_eq!(exact_l2(&t).unwrap(), 2.25f64.ln(), max_relative = 1e-11);
    }

    #[test]
    fn sp_noise_is_unsupported_by_the_oracle() {
        let a = MatrixSpec::from_rows(&[vec![0.4, 0.1], vec![0.1, 0.3]]).unwrap();
        let sys = SystemSpec::new(a, NoiseModel::sp(0.3), vec![1.0, 1.0]).unwrap();
        match exact_second_moment(&sys, 3) {
            Err(Error::UnsupportedNoise(_)) => {}
            other => panic!("expected UnsupportedNoise, got {other:?}"),
        }
    }

    #[test]
    fn mc_agrees_with_propagator_across_kinds() {
        // Oracle agreement on a small symmetric fixture for UH/SH/T/UP.
        let a = MatrixSpec::from_rows(&[
            vec![0.40, 0.20, 0.10],
            vec![0.20, 0.30, 0.15],
            vec![0.10, 0.15, 0.35],
        ])
        .unwrap();
        // T noise needs a smaller variance here: its effective eps^2 is
        // n^2-fold larger, and a 2e4-run mean cannot resolve the heavy
        // tail once t * (L4 - 2 L2) grows past a few units.
        let models = [
            NoiseModel::uh(0.02),
            NoiseModel::sh(0.02),
            NoiseModel::t(0.002),
            NoiseModel::up(0.3),
        ];
        for model in models {
            let sys = SystemSpec::new(a.clone(), model, vec![1.0, 0.5, 0.25]).unwrap();
            let series = estimate_moments(&sys, &[2], 15, 20_000, 7).unwrap();
            let exact = exact_second_moment(&sys, 15).unwrap();
            for t in 1..=15usize {
                let est = series.estimate(t, 2).unwrap();
                let se = series.stderr_at(t, 2).unwrap();
                assert!(
                    (est - exact[t]).abs() <= 3.0 * se.max(1e-12),
                    "{} t={t}: {est} vs {} (se {se})",
                    sys.noise.kind_name(),
                    exact[t]
                );
            }
        }
    }

    #[test]
    fn seed_determinism_across_thread_counts() {
        let sys = scalar_system(0.95, NoiseModel::uh(0.03));
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let s1 = pool1.install(|| estimate_moments(&sys, &[1, 2], 12, 4000, 99).unwrap());
        let s4 = pool4.install(|| estimate_moments(&sys, &[1, 2], 12, 4000, 99).unwrap());
        assert_eq!(s1.estimates, s4.estimates);
        assert_eq!(s1.stderr, s4.stderr);
    }

    #[test]
    fn fit_recovers_synthetic_slope() {
        // Exact geometric series e^{0.1 t}.
        let t_max = 20;
        let series = MomentSeries {
            times: (0..=t_max).collect(),
            p_orders: vec![2],
            estimates: (0..=t_max).map(|t| vec![(0.1 * t as f64).exp()]).collect(),
            stderr: vec![vec![0.0]; t_max + 1],
            flagged: vec![0; t_max + 1],
            runs: 1,
            seed: 0,
            bootstrap_estimates: Vec::new(),
        };
        let fit = fit_lyapunov(&series, 2, (0, t_max)).unwrap();
        assert_relative_eq!(fit.l_p, 0.1, epsilon = 1e-12);
        assert!(fit.ci < 1e-12);
    }

    #[test]
    fn fit_rejects_bad_windows() {
        let series = MomentSeries {
            times: (0..=10).collect(),
            p_orders: vec![2],
            estimates: (0..=10).map(|t| vec![if t == 5 { -1.0 } else { 1.0 }]).collect(),
            stderr: vec![vec![0.0]; 11],
            flagged: vec![0; 11],
            runs: 1,
            seed: 0,
            bootstrap_estimates: Vec::new(),
        };
        assert!(matches!(
            fit_lyapunov(&series, 2, (0, 3)),
            Err(Error::DegenerateWindow(_))
        ));
        assert!(matches!(
            fit_lyapunov(&series, 2, (2, 8)),
            Err(Error::DegenerateWindow(_))
        ));
        assert!(matches!(
            fit_lyapunov(&series, 2, (0, 20)),
            Err(Error::DegenerateWindow(_))
        ));
    }

    #[test]
    fn noise_only_l2_fit() {
        // A = 0, n = 3, UH b^2 = 0.25: L2 = log 0.75.
        let n = 3;
        let a = MatrixSpec::from_rows(&vec![vec![0.0; n]; n]).unwrap();
        let sys = SystemSpec::new(a, NoiseModel::uh(0.25), vec![1.0; n]).unwrap();
        let series = estimate_moments(&sys, &[2], 20, 40_000, 5).unwrap();
        let fit = fit_lyapunov(&series, 2, (1, 20)).unwrap();
        let expected = 0.75f64.ln();
        assert!(
            (fit.l_p - expected).abs() <= fit.ci.max(0.02),
            "L2 fit {} vs {expected} (ci {})",
            fit.l_p,
            fit.ci
        );
    }

    #[test]
    fn histogram_zero_noise_is_degenerate_at_zero() {
        let a = fixtures::well_behaved_5x5();
        let sys = SystemSpec::new(a, NoiseModel::uh(0.0), vec![1.0; 5]).unwrap();
        let h = log_state_histogram(&sys, 10, 50, 3).unwrap();
        assert_eq!(h.excluded, 0);
        for s in &h.samples {
            assert!(s.abs() < 1e-10);
        }
        assert!(h.sd < 1e-10);
    }

    #[test]
    fn histogram_scalar_lognormal_sd() {
        // Scalar small-noise system: the per-step log increment is
        // s = ln(1 + (b/a) z) with z standard normal. Quadrature gives the
        // exact sigma_s^2; the fitted sd must match sqrt(t sigma_s^2), and
        // the leading-order sqrt(t b^2/a^2) within its own O(b/a) slack.
        let (a, b2) = (0.97, 0.05);
        let sys = scalar_system(a, NoiseModel::uh(b2));
        let t = 25;
        let h = log_state_histogram(&sys, t, 40_000, 11).unwrap();

        let ratio = (b2.sqrt()) / a;
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        let steps = 400_000;
        // Integrate over the region where the sign survives (1 + r z > 0),
        // matching the histogram's sign-flip exclusion.
        let z_lo = -1.0 / ratio + 1e-9;
        let (lo, hi) = (z_lo.max(-8.0), 8.0);
        let dz = (hi - lo) / steps as f64;
        for i in 0..steps {
            let z: f64 = lo + (i as f64 + 0.5) * dz;
            let w = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt() * dz;
            let s = (1.0 + ratio * z).ln();
            m0 += w;
            m1 += w * s;
            m2 += w * s * s;
        }
        let mu_s = m1 / m0;
        let sigma_s2 = m2 / m0 - mu_s * mu_s;
        let predicted = (t as f64 * sigma_s2).sqrt();
        assert!(
            (h.sd - predicted).abs() < 0.03 * predicted,
            "sd {} vs quadrature {predicted}",
            h.sd
        );
        let leading = (t as f64 * b2 / (a * a)).sqrt();
        assert!((h.sd - leading).abs() < 0.15 * leading, "sd {} vs leading {leading}", h.sd);
    }

    #[test]
    fn divergent_run_overflow_is_flagged() {
        let a = MatrixSpec::scalar(1e60).unwrap();
        let sys = SystemSpec::new(a, NoiseModel::uh(0.0), vec![1.0]).unwrap();
        let mut rng = derive_rng(4, "test.dyn", 0);
        let traj = simulate_trajectory(&sys, 10, &mut rng).unwrap();
        assert!(traj.overflow_at.is_some());
        assert!(traj.states.len() < 11);
    }
}
