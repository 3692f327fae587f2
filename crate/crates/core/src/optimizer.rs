//! Episode-based relative entropy policy search.
//!
//! Each iteration draws a batch of parameter vectors from a Gaussian search
//! distribution, scores them through a black-box [`Objective`], solves the
//! convex dual for the temperature `η` of the KL bound and refits the
//! Gaussian by weighted maximum likelihood with weights `exp(R_i / η)`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Rewards whose spread falls below this are treated as constant.
pub const DEGENERATE_SPREAD: f64 = 1e-12;

const MIN_SEARCH_EIGENVALUE: f64 = 1e-12;
const GRID_POINTS_PER_DECADE: f64 = 20.0;
/// Width of the final bisection bracket in ln η.
const LOG_ETA_TOL: f64 = 1e-13;

/// Gaussian search distribution over policy parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchDistribution {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl SearchDistribution {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::InvalidArgument("search distribution has dimension 0".into()));
        }
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::DimensionMismatch {
                context: "search covariance",
                expected: d,
                actual: covariance.nrows(),
            });
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("search distribution must be finite".into()));
        }
        if !linalg::is_symmetric(&covariance, 1e-9) {
            return Err(Error::InvalidArgument("search covariance is not symmetric".into()));
        }
        let covariance = linalg::symmetrize(&covariance);
        let slack = 1e-14 * covariance.amax();
        if linalg::min_eigenvalue(&covariance) < MIN_SEARCH_EIGENVALUE - slack {
            return Err(Error::NotPositiveDefinite("search covariance"));
        }
        Ok(Self { mean, covariance })
    }

    /// `N(mean, scale·I)`.
    pub fn isotropic(mean: DVector<f64>, scale: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(mean, DMatrix::identity(d, d) * scale)
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Draws `n` parameter vectors in a fixed order from `rng`.
    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<DVector<f64>>> {
        let l = linalg::cholesky_lower(&self.covariance, "search covariance")?;
        let d = self.dim();
        Ok((0..n)
            .map(|_| {
                let z = DVector::from_iterator(d, (0..d).map(|_| rng.sample(StandardNormal)));
                &self.mean + &l * z
            })
            .collect())
    }

    /// Closed-form `KL(self ‖ other)` in nats.
    pub fn kl_divergence(&self, other: &SearchDistribution) -> Result<f64> {
        linalg::gaussian_kl(&self.mean, &self.covariance, &other.mean, &other.covariance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepsConfig {
    /// KL bound in nats.
    pub epsilon: f64,
    pub samples_per_iteration: usize,
    pub num_iterations: usize,
    pub eta_min: f64,
    /// Added to the covariance diagonal after every update.
    pub cov_floor: f64,
}

impl Default for RepsConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            samples_per_iteration: 30,
            num_iterations: 40,
            eta_min: 1e-8,
            cov_floor: 1e-8,
        }
    }
}

impl RepsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.samples_per_iteration < 2 {
            return Err(Error::InvalidArgument(format!(
                "samples_per_iteration must be >= 2, got {}",
                self.samples_per_iteration
            )));
        }
        if !(self.eta_min > 0.0) {
            return Err(Error::InvalidArgument(format!("eta_min must be > 0, got {}", self.eta_min)));
        }
        if !(self.cov_floor > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cov_floor must be > 0, got {}",
                self.cov_floor
            )));
        }
        Ok(())
    }
}

/// Evaluated parameter samples; higher reward is better.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    parameters: Vec<DVector<f64>>,
    rewards: Vec<f64>,
}

impl SampleBatch {
    pub fn new(parameters: Vec<DVector<f64>>, rewards: Vec<f64>) -> Result<Self> {
        if parameters.len() != rewards.len() {
            return Err(Error::DimensionMismatch {
                context: "batch rewards vs parameters",
                expected: parameters.len(),
                actual: rewards.len(),
            });
        }
        if parameters.is_empty() {
            return Err(Error::InvalidArgument("empty sample batch".into()));
        }
        if let Some((index, &value)) = rewards.iter().enumerate().find(|(_, r)| !r.is_finite()) {
            return Err(Error::NonFiniteReward { index, value });
        }
        let d = parameters[0].len();
        if let Some(p) = parameters.iter().find(|p| p.len() != d) {
            return Err(Error::DimensionMismatch {
                context: "batch parameter dimension",
                expected: d,
                actual: p.len(),
            });
        }
        Ok(Self { parameters, rewards })
    }

    pub fn parameters(&self) -> &[DVector<f64>] {
        &self.parameters
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub mean_reward: f64,
    pub max_reward: f64,
    pub eta: f64,
    pub kl_to_previous: f64,
    pub effective_sample_size: f64,
}

/// Black-box episode reward over parameter vectors.
///
/// Implementations must be side-effect free per call; batches are scored
/// concurrently.
pub trait Objective: Sync {
    fn evaluate(&self, params: &DVector<f64>) -> Result<f64>;
}

impl<F> Objective for F
where
    F: Fn(&DVector<f64>) -> f64 + Sync,
{
    fn evaluate(&self, params: &DVector<f64>) -> Result<f64> {
        Ok(self(params))
    }
}

fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Dual `g(η) = η·ε + η·log((1/N)·Σ exp(R_i/η))`, evaluated in log-sum-exp form.
pub fn dual_value(eta: f64, rewards: &[f64], epsilon: f64) -> f64 {
    let max = max_of(rewards);
    let n = rewards.len() as f64;
    let sum: f64 = rewards.iter().map(|r| ((r - max) / eta).exp()).sum();
    eta * epsilon + max + eta * (sum / n).ln()
}

/// Minimizes [`dual_value`] over `η ∈ [eta_min, eta_max]`.
///
/// A logarithmic grid brackets the minimum and bisection on the sign of
/// the derivative refines it. Numerically constant rewards return `eta_min`.
pub fn solve_eta(rewards: &[f64], epsilon: f64, eta_min: f64) -> f64 {
    if rewards.len() < 2 {
        return eta_min;
    }
    let max = max_of(rewards);
    let spread = max - min_of(rewards);
    if !(spread >= DEGENERATE_SPREAD) {
        return eta_min;
    }
    // Work on max-shifted rewards so a common offset cannot move the argmin.
    let shifted: Vec<f64> = rewards.iter().map(|r| r - max).collect();
    let g = |log_eta: f64| dual_value(log_eta.exp(), &shifted, epsilon);

    let eta_max = (1e3 * spread * (1.0 / epsilon.sqrt()).max(1.0)).max(eta_min * 10.0);
    let lo = eta_min.ln();
    let hi = eta_max.ln();
    let steps = (((hi - lo) / std::f64::consts::LN_10) * GRID_POINTS_PER_DECADE).ceil().max(2.0) as usize;
    let h = (hi - lo) / steps as f64;
    let (best, _) = (0..=steps)
        .map(|i| (i, g(lo + h * i as f64)))
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });

    // g is convex, so its derivative changes sign once inside the bracket.
    // Bisecting on that sign resolves η far below the noise floor of g itself.
    let slope = |log_eta: f64| {
        let eta = log_eta.exp();
        let (mut s, mut sa) = (0.0, 0.0);
        for r in &shifted {
            let w = (r / eta).exp();
            s += w;
            sa += w * r;
        }
        epsilon + (s / shifted.len() as f64).ln() - sa / (eta * s)
    };
    let mut a = lo + h * best.saturating_sub(1) as f64;
    let mut b = lo + h * (best + 1).min(steps) as f64;
    if slope(a) >= 0.0 {
        return a.exp().max(eta_min);
    }
    if slope(b) <= 0.0 {
        return b.exp();
    }
    while b - a > LOG_ETA_TOL {
        let m = 0.5 * (a + b);
        if slope(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    (0.5 * (a + b)).exp().max(eta_min)
}

/// Normalized softmax weights `exp((R_i − max R)/η)`.
pub fn sample_weights(rewards: &[f64], eta: f64) -> Vec<f64> {
    let max = max_of(rewards);
    let raw: Vec<f64> = rewards.iter().map(|r| ((r - max) / eta).exp()).collect();
    let total: f64 = raw.iter().sum();
    assert!(total >= 1.0, "max-shifted weights cannot all underflow");
    raw.into_iter().map(|w| w / total).collect()
}

/// `(Σd)² / Σd²` for the given weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    s * s / s2
}

/// Weighted maximum-likelihood refit of the search distribution.
///
/// `previous` only fixes the expected dimension; the result depends on the
/// batch alone.
pub fn weighted_update(
    batch: &SampleBatch,
    eta: f64,
    previous: &SearchDistribution,
    cov_floor: f64,
) -> Result<SearchDistribution> {
    let d = previous.dim();
    if batch.parameters[0].len() != d {
        return Err(Error::DimensionMismatch {
            context: "batch vs search distribution",
            expected: d,
            actual: batch.parameters[0].len(),
        });
    }
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!("eta must be > 0, got {eta}")));
    }
    let weights = sample_weights(&batch.rewards, eta);
    let mut mean = DVector::zeros(d);
    for (w, theta) in weights.iter().zip(&batch.parameters) {
        mean.axpy(*w, theta, 1.0);
    }
    let mut cov = DMatrix::zeros(d, d);
    for (w, theta) in weights.iter().zip(&batch.parameters) {
        let c = theta - &mean;
        cov.ger(*w, &c, &c, 1.0);
    }
    for i in 0..d {
        cov[(i, i)] += cov_floor;
    }
    SearchDistribution::new(mean, linalg::symmetrize(&cov))
}

/// One sample/evaluate/update cycle.
pub fn reps_step<O, R>(
    current: &SearchDistribution,
    objective: &O,
    config: &RepsConfig,
    rng: &mut R,
) -> Result<(SearchDistribution, IterationStats)>
where
    O: Objective + ?Sized,
    R: Rng + ?Sized,
{
    config.validate()?;
    let parameters = current.sample_n(config.samples_per_iteration, rng)?;
    let rewards = parameters
        .par_iter()
        .map(|theta| objective.evaluate(theta))
        .collect::<Result<Vec<f64>>>()?;
    let batch = SampleBatch::new(parameters, rewards)?;

    let eta = solve_eta(&batch.rewards, config.epsilon, config.eta_min);
    let next = weighted_update(&batch, eta, current, config.cov_floor)?;
    let weights = sample_weights(&batch.rewards, eta);
    let stats = IterationStats {
        mean_reward: batch.rewards.iter().sum::<f64>() / batch.len() as f64,
        max_reward: max_of(&batch.rewards),
        eta,
        kl_to_previous: next.kl_divergence(current)?,
        effective_sample_size: effective_sample_size(&weights),
    };
    Ok((next, stats))
}

/// Runs `config.num_iterations` REPS steps and returns the learning curve.
pub fn optimize<O, R>(
    init: &SearchDistribution,
    objective: &O,
    config: &RepsConfig,
    rng: &mut R,
) -> Result<(SearchDistribution, Vec<IterationStats>)>
where
    O: Objective + ?Sized,
    R: Rng + ?Sized,
{
    config.validate()?;
    let mut current = init.clone();
    let mut curve = Vec::with_capacity(config.num_iterations);
    for _ in 0..config.num_iterations {
        let (next, stats) = reps_step(&current, objective, config, rng)?;
        curve.push(stats);
        current = next;
    }
    Ok((current, curve))
}

pub const CURVE_CSV_HEADER: &str = "iteration,mean_reward,max_reward,eta,kl,ess";

/// Writes a learning curve as CSV. `preamble` lines are emitted first as
/// `#` comments.
pub fn write_curve_csv<W: Write>(
    mut out: W,
    curve: &[IterationStats],
    preamble: &[String],
) -> std::io::Result<()> {
    for line in preamble {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "{CURVE_CSV_HEADER}")?;
    for (i, s) in curve.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            i + 1,
            s.mean_reward,
            s.max_reward,
            s.eta,
            s.kl_to_previous,
            s.effective_sample_size
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    // Dense grid over ln η; independent of the bracketing solver.
    fn grid_argmin(rewards: &[f64], epsilon: f64) -> f64 {
        let n = 1_000_000;
        let (lo, hi) = (-12.0f64, 6.0f64);
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=n {
            let eta = (lo + (hi - lo) * i as f64 / n as f64).exp();
            let mean_exp: f64 =
                rewards.iter().map(|r| (r / eta).exp()).sum::<f64>() / rewards.len() as f64;
            let v = eta * epsilon + eta * mean_exp.ln();
            if v < best.0 {
                best = (v, eta);
            }
        }
        best.1
    }

    #[test]
    fn dual_of_constant_rewards() {
        let rewards = [2.5; 7];
        for eta in [1e-3, 0.1, 1.0, 50.0] {
            assert!((dual_value(eta, &rewards, 0.3) - (eta * 0.3 + 2.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn dual_shifts_with_rewards() {
        let rewards = [0.3, -1.2, 0.8, 0.0];
        let shifted: Vec<f64> = rewards.iter().map(|r| r + 7.0).collect();
        for eta in [0.05, 0.5, 5.0] {
            let diff = dual_value(eta, &shifted, 0.1) - dual_value(eta, &rewards, 0.1);
            assert!((diff - 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dual_matches_direct_evaluation() {
        // 0.1 + ln((1 + e^-1) / 2), evaluated at 40 digits
        let high_precision = -0.279_885_493_041_722_475_368_236_626_490_320_9;
        assert!((dual_value(1.0, &[0.0, -1.0], 0.1) - high_precision).abs() < 1e-15);
    }

    #[test]
    fn dual_is_convex() {
        let mut r = rng(1);
        for _ in 0..20 {
            let rewards: Vec<f64> = (0..10).map(|_| r.random_range(-3.0..1.0)).collect();
            // second differences on a uniform grid in η
            let v: Vec<f64> = (0..100)
                .map(|i| dual_value(0.01 + 0.05 * i as f64, &rewards, 0.5))
                .collect();
            for w in v.windows(3) {
                assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-8);
            }
        }
    }

    #[test]
    fn solve_eta_constant_rewards_clamps() {
        assert_eq!(solve_eta(&[1.0, 1.0, 1.0], 0.5, 1e-8), 1e-8);
        assert_eq!(solve_eta(&[1.0], 0.5, 1e-3), 1e-3);
    }

    #[test]
    fn solve_eta_matches_grid_oracle() {
        let rewards = [1.0, 0.0];
        let eta = solve_eta(&rewards, 0.5, 1e-8);
        let oracle = grid_argmin(&rewards, 0.5);
        assert!(((eta - oracle) / oracle).abs() < 1e-3, "{eta} vs {oracle}");

        let scaled = [10.0, 0.0];
        let eta10 = solve_eta(&scaled, 0.5, 1e-8);
        let oracle10 = grid_argmin(&scaled, 0.5);
        assert!(((eta10 - oracle10) / oracle10).abs() < 1e-3);
        assert!(((eta10 / eta) - 10.0).abs() / 10.0 < 1e-3);
    }

    #[test]
    fn uniform_rewards_give_sample_moments() {
        let mut r = rng(2);
        let params: Vec<DVector<f64>> =
            (0..6).map(|_| DVector::from_fn(3, |_, _| r.random_range(-1.0..1.0))).collect();
        let batch = SampleBatch::new(params.clone(), vec![0.4; 6]).unwrap();
        let prev = SearchDistribution::isotropic(DVector::zeros(3), 1.0).unwrap();
        let eta = solve_eta(batch.rewards(), 0.5, 1e-8);
        let next = weighted_update(&batch, eta, &prev, 1e-8).unwrap();
        let mean = params.iter().fold(DVector::zeros(3), |a, p| a + p) / 6.0;
        assert!((next.mean() - &mean).amax() < 1e-12);
        let mut cov = DMatrix::identity(3, 3) * 1e-8;
        for p in &params {
            cov += (p - &mean) * (p - &mean).transpose() / 6.0;
        }
        assert!((next.covariance() - cov).amax() < 1e-12);
    }

    #[test]
    fn small_eta_concentrates_on_best_sample() {
        let params: Vec<DVector<f64>> = vec![
            DVector::from_vec(vec![0.0, 0.0]),
            DVector::from_vec(vec![1.0, 2.0]),
            DVector::from_vec(vec![-3.0, 0.5]),
        ];
        let batch = SampleBatch::new(params, vec![-1.0, -0.5, -2.0]).unwrap();
        let prev = SearchDistribution::isotropic(DVector::zeros(2), 1.0).unwrap();
        let next = weighted_update(&batch, 1e-3, &prev, 1e-8).unwrap();
        assert!((next.mean() - DVector::from_vec(vec![1.0, 2.0])).amax() < 1e-6);
    }

    #[test]
    fn weighted_update_matches_moment_oracle() {
        let params: Vec<Vec<f64>> = vec![
            vec![0.1, -0.3],
            vec![1.2, 0.4],
            vec![-0.7, 0.9],
            vec![0.5, 0.5],
            vec![-1.1, -0.2],
        ];
        let rewards = [-0.2, -1.5, -0.7, 0.3, -2.0];
        let eta = 0.8;
        // independent weighted moments in plain arithmetic
        let raw: Vec<f64> = rewards.iter().map(|r| (r / eta as f64).exp()).collect();
        let z: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / z).collect();
        let m: Vec<f64> = (0..2)
            .map(|j| (0..5).map(|i| w[i] * params[i][j]).sum())
            .collect();
        let batch = SampleBatch::new(
            params.iter().map(|p| DVector::from_vec(p.clone())).collect(),
            rewards.to_vec(),
        )
        .unwrap();
        let prev = SearchDistribution::isotropic(DVector::zeros(2), 1.0).unwrap();
        let next = weighted_update(&batch, eta, &prev, 1e-8).unwrap();
        for j in 0..2 {
            assert!((next.mean()[j] - m[j]).abs() < 1e-10);
            for k in 0..2 {
                let mut c: f64 = (0..5).map(|i| w[i] * (params[i][j] - m[j]) * (params[i][k] - m[k])).sum();
                if j == k {
                    c += 1e-8;
                }
                assert!((next.covariance()[(j, k)] - c).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn batch_rejects_non_finite() {
        let p = vec![DVector::zeros(2), DVector::zeros(2)];
        assert!(matches!(
            SampleBatch::new(p, vec![0.0, f64::NAN]),
            Err(Error::NonFiniteReward { index: 1, .. })
        ));
    }

    #[test]
    fn reps_step_reports_bad_sample() {
        let init = SearchDistribution::isotropic(DVector::zeros(2), 1.0).unwrap();
        let config = RepsConfig { samples_per_iteration: 5, ..RepsConfig::default() };
        let f = |theta: &DVector<f64>| if theta[0] > 0.0 { f64::INFINITY } else { 0.0 };
        let err = reps_step(&init, &f, &config, &mut rng(3)).unwrap_err();
        assert!(matches!(err, Error::NonFiniteReward { .. }));
    }

    #[test]
    fn constant_objective_returns_sample_moments() {
        let init = SearchDistribution::isotropic(DVector::zeros(3), 1.0).unwrap();
        let config = RepsConfig { samples_per_iteration: 50, ..RepsConfig::default() };
        let f = |_: &DVector<f64>| 3.0;
        let (next, stats) = reps_step(&init, &f, &config, &mut rng(4)).unwrap();
        let draws = init.sample_n(50, &mut rng(4)).unwrap();
        let mean = draws.iter().fold(DVector::zeros(3), |a, p| a + p) / 50.0;
        assert!((next.mean() - mean).amax() < 1e-12);
        assert_eq!(stats.eta, config.eta_min);
        assert!((stats.effective_sample_size - 50.0).abs() < 1e-9);
    }

    #[test]
    fn reps_step_is_deterministic() {
        let init = SearchDistribution::isotropic(DVector::from_vec(vec![1.0, -1.0]), 0.5).unwrap();
        let f = |t: &DVector<f64>| -t.norm_squared();
        let config = RepsConfig::default();
        let a = reps_step(&init, &f, &config, &mut rng(5)).unwrap();
        let b = reps_step(&init, &f, &config, &mut rng(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sphere_steps_move_toward_optimum() {
        let target = DVector::from_vec(vec![0.6, -0.4]);
        let f = |t: &DVector<f64>| -(t - &target).norm_squared();
        let config = RepsConfig { samples_per_iteration: 200, ..RepsConfig::default() };
        let init = SearchDistribution::isotropic(DVector::zeros(2), 1.0).unwrap();
        let improved = (0..50)
            .filter(|&trial| {
                let (next, _) = reps_step(&init, &f, &config, &mut rng(100 + trial)).unwrap();
                (next.mean() - &target).norm() < (init.mean() - &target).norm()
            })
            .count();
        assert!(improved as f64 >= 0.95 * 50.0, "{improved}/50");
    }

    #[test]
    fn zero_iterations_is_identity() {
        let init = SearchDistribution::isotropic(DVector::zeros(2), 1.0).unwrap();
        let config = RepsConfig { num_iterations: 0, ..RepsConfig::default() };
        let f = |_: &DVector<f64>| 0.0;
        let (fin, curve) = optimize(&init, &f, &config, &mut rng(6)).unwrap();
        assert_eq!(fin, init);
        assert!(curve.is_empty());
    }

    #[test]
    fn curve_csv_has_header() {
        let stats = IterationStats {
            mean_reward: -1.5,
            max_reward: -0.5,
            eta: 0.25,
            kl_to_previous: 0.4,
            effective_sample_size: 12.0,
        };
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &[stats], &["run x".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "# run x\niteration,mean_reward,max_reward,eta,kl,ess\n1,-1.5,-0.5,0.25,0.4,12\n");
    }

    #[test]
    fn config_validation() {
        assert!(RepsConfig { epsilon: 0.0, ..RepsConfig::default() }.validate().is_err());
        assert!(RepsConfig { samples_per_iteration: 1, ..RepsConfig::default() }.validate().is_err());
        assert!(RepsConfig::default().validate().is_ok());
    }
}
