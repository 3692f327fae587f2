//! Leave-one-out transfer experiments.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::movement_primitives::{basis_matrix, render_with, WeightVector};
use crate::optimizer::{optimize, IterationStats, Objective, RepsConfig, SearchDistribution};
use crate::reward::{accumulated_reward, calibrate_from_terms, task_term, push_term, RewardBreakdown, RewardConfig};
use crate::simulator::{rollout, ArmModel, RolloutResult, SimConfig, WorldState};
use crate::skill_library::{
    baseline_init, combine_sources, full_init, knn_select, partial_init, Skill, SkillLibrary, TaskDescriptor,
    TransferInit, TransferMode,
};

use super::dataset::{Dataset, Variant};
use super::derive_seed;

const STREAM_SUBSET: u64 = 0x5B5E;
const STREAM_BASELINE: u64 = 0xBA5E;
const STREAM_REPS: u64 = 0x4E95;
const STREAM_CALIBRATION: u64 = 0xCA1B;

/// Full library of the leave-one-out matrix (all skills but the target).
pub const LARGE_LIBRARY: usize = 9;

/// One cell of the experiment matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: Variant,
    pub mode: TransferMode,
    pub k: usize,
    pub library_size: usize,
    pub num_iterations: usize,
    pub samples_per_iteration: usize,
    pub epsilon: f64,
    pub s: f64,
    pub seeds: Vec<u64>,
    #[serde(default = "default_eta_min")]
    pub eta_min: f64,
    #[serde(default = "default_cov_floor")]
    pub cov_floor: f64,
}

fn default_eta_min() -> f64 {
    RepsConfig::default().eta_min
}

fn default_cov_floor() -> f64 {
    RepsConfig::default().cov_floor
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.library_size == 0 {
            return Err(Error::Config("k and library_size must be positive".into()));
        }
        if self.k > self.library_size {
            return Err(Error::Config(format!(
                "k = {} exceeds library_size = {}",
                self.k, self.library_size
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be nonempty".into()));
        }
        if !(self.s > 0.0) {
            return Err(Error::Config(format!("s must be > 0, got {}", self.s)));
        }
        self.reps().validate()
    }

    pub fn reps(&self) -> RepsConfig {
        RepsConfig {
            epsilon: self.epsilon,
            samples_per_iteration: self.samples_per_iteration,
            num_iterations: self.num_iterations,
            eta_min: self.eta_min,
            cov_floor: self.cov_floor,
        }
    }
}

/// Learning curve and transfer metrics of one (target, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub target_skill_id: String,
    pub source_ids: Vec<String>,
    pub curve: Vec<IterationStats>,
    pub init_mean: Vec<f64>,
    pub final_mean: Vec<f64>,
    /// Reward of the initial mean, before any update.
    pub initial_reward: f64,
    /// First (1-based) iteration whose mean reward reaches the matching
    /// baseline run's final mean reward; see [`assign_thresholds`].
    pub iterations_to_threshold: Option<usize>,
}

impl RunRecord {
    pub fn final_mean_reward(&self) -> Option<f64> {
        self.curve.last().map(|s| s.mean_reward)
    }

    /// Weight-space distance from the initialization to the learned mean.
    pub fn similarity(&self) -> f64 {
        l2(&self.final_mean, &self.init_mean)
    }
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// L2 distance between a run's final mean weights and an initialization mean.
pub fn similarity_to_init(record: &RunRecord, init: &TransferInit) -> Result<f64> {
    if record.final_mean.len() != init.mean.len() {
        return Err(Error::DimensionMismatch {
            context: "final mean vs init mean",
            expected: init.mean.len(),
            actual: record.final_mean.len(),
        });
    }
    Ok(l2(&record.final_mean, init.mean.as_slice()))
}

/// Reward of executing ProMP weights in the pushing world.
pub struct PushObjective<'a> {
    phi: DMatrix<f64>,
    num_basis: usize,
    arm: &'a ArmModel,
    sim: &'a SimConfig,
    start: &'a WorldState,
    target: &'a TaskDescriptor,
    reward: RewardConfig,
}

impl<'a> PushObjective<'a> {
    pub fn new(dataset: &'a Dataset, target: &'a TaskDescriptor, reward: RewardConfig) -> Result<Self> {
        let first = dataset
            .library
            .skills()
            .first()
            .ok_or_else(|| Error::Library("dataset library is empty".into()))?;
        let basis = first.promp.basis();
        Ok(Self {
            phi: basis_matrix(basis),
            num_basis: basis.num_basis(),
            arm: &dataset.arm,
            sim: &dataset.sim,
            start: &dataset.start_state,
            target,
            reward,
        })
    }

    pub fn rollout(&self, params: &DVector<f64>) -> Result<RolloutResult> {
        let weights = WeightVector::from_flat(params, self.num_basis, 3)?;
        let joints = render_with(&self.phi, &weights, self.sim.dt)?;
        rollout(self.arm, self.sim, &joints, self.start)
    }

    pub fn breakdown(&self, params: &DVector<f64>) -> Result<RewardBreakdown> {
        accumulated_reward(self.target, &self.rollout(params)?, &self.reward)
    }
}

impl Objective for PushObjective<'_> {
    fn evaluate(&self, params: &DVector<f64>) -> Result<f64> {
        Ok(self.breakdown(params)?.total)
    }
}

/// Source library for one target: leave-one-out, then shrunk for small-library settings.
pub fn source_library(dataset: &Dataset, target: &Skill, config: &ExperimentConfig, seed: u64) -> Result<SkillLibrary> {
    let pool = dataset.library.without(&target.id);
    if config.library_size > pool.len() {
        return Err(Error::Config(format!(
            "library_size {} exceeds the {} skills available besides the target",
            config.library_size,
            pool.len()
        )));
    }
    if config.library_size == pool.len() {
        return Ok(pool);
    }
    if config.library_size > config.k {
        let nearest = knn_select(&pool, &target.descriptor, config.library_size)?;
        let ids: Vec<&str> = nearest.iter().map(|s| s.id.as_str()).collect();
        return Ok(pool.subset(&ids));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[target_index(dataset, &target.id), STREAM_SUBSET]));
    let picked = sample_indices(&mut rng, pool.len(), config.k);
    let mut ids: Vec<&str> = picked.iter().map(|i| pool.skills()[i].id.as_str()).collect();
    ids.sort_unstable();
    Ok(pool.subset(&ids))
}

/// Search-distribution initialization for `mode` from `library`.
pub fn build_init(
    mode: TransferMode,
    library: &SkillLibrary,
    target: &TaskDescriptor,
    k: usize,
    s: f64,
    baseline_seed: u64,
) -> Result<TransferInit> {
    match mode {
        TransferMode::Baseline => {
            let mut rng = ChaCha8Rng::seed_from_u64(baseline_seed);
            baseline_init(library, s, &mut rng)
        }
        TransferMode::Partial | TransferMode::Full => {
            let sources = knn_select(library, target, k)?;
            let (mean, cov) = combine_sources(&sources)?;
            let init = if mode == TransferMode::Partial {
                partial_init(&mean, s)?
            } else {
                full_init(&mean, &cov, s)?
            };
            Ok(init.with_sources(&sources))
        }
    }
}

fn target_index(dataset: &Dataset, id: &str) -> u64 {
    dataset.library.skills().iter().position(|s| s.id == id).unwrap_or(0) as u64
}

/// Initialization used for one (target, seed) run.
pub fn run_init(dataset: &Dataset, target: &Skill, config: &ExperimentConfig, seed: u64) -> Result<TransferInit> {
    let library = source_library(dataset, target, config, seed)?;
    let baseline_seed = derive_seed(seed, &[target_index(dataset, &target.id), STREAM_BASELINE]);
    build_init(config.mode, &library, &target.descriptor, config.k, config.s, baseline_seed)
}

/// One REPS run on `target` from the configured initialization.
pub fn run_single(
    dataset: &Dataset,
    target: &Skill,
    config: &ExperimentConfig,
    seed: u64,
    reward: RewardConfig,
) -> Result<RunRecord> {
    let init = run_init(dataset, target, config, seed)?;
    let objective = PushObjective::new(dataset, &target.descriptor, reward)?;
    let initial_reward = objective.evaluate(&init.mean)?;
    let start = SearchDistribution::new(init.mean.clone(), init.covariance.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[target_index(dataset, &target.id), STREAM_REPS]));
    let (last, curve) = optimize(&start, &objective, &config.reps(), &mut rng)?;
    Ok(RunRecord {
        config: config.clone(),
        seed,
        target_skill_id: target.id.clone(),
        source_ids: init.source_ids,
        curve,
        init_mean: init.mean.iter().copied().collect(),
        final_mean: last.mean().iter().copied().collect(),
        initial_reward,
        iterations_to_threshold: None,
    })
}

/// Every target of `dataset` under every seed, in (target, seed) order.
///
/// Runs execute in parallel on the current rayon pool.
pub fn run_transfer_experiment(config: &ExperimentConfig, dataset: &Dataset, reward: RewardConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    reward.validate()?;
    if config.dataset != dataset.variant {
        return Err(Error::Config(format!(
            "config targets dataset {} but dataset {} was given",
            config.dataset, dataset.variant
        )));
    }
    let jobs: Vec<(&Skill, u64)> = dataset
        .library
        .skills()
        .iter()
        .flat_map(|t| config.seeds.iter().map(move |&s| (t, s)))
        .collect();
    jobs.par_iter()
        .map(|&(target, seed)| run_single(dataset, target, config, seed, reward))
        .collect()
}

/// Fills `iterations_to_threshold` from the baseline run sharing dataset,
/// k, library size, target and seed.
///
/// Runs that never reach the threshold are censored at `num_iterations + 1`;
/// records without a matching baseline get `None`.
pub fn assign_thresholds(records: &mut [RunRecord]) {
    let baselines: Vec<(Variant, usize, usize, String, u64, f64)> = records
        .iter()
        .filter(|r| r.config.mode == TransferMode::Baseline)
        .filter_map(|r| {
            r.final_mean_reward().map(|f| {
                (r.config.dataset, r.config.k, r.config.library_size, r.target_skill_id.clone(), r.seed, f)
            })
        })
        .collect();
    for r in records.iter_mut() {
        let threshold = baselines.iter().find(|b| {
            b.0 == r.config.dataset
                && b.1 == r.config.k
                && b.2 == r.config.library_size
                && b.3 == r.target_skill_id
                && b.4 == r.seed
        });
        r.iterations_to_threshold = threshold.map(|b| {
            r.curve
                .iter()
                .position(|s| s.mean_reward >= b.5)
                .map_or(r.config.num_iterations + 1, |i| i + 1)
        });
    }
}

/// Raw `(task, push)` distances of `samples` rollouts drawn from baseline
/// initializations.
///
/// Sample `j` targets skill `j mod n` with the rest of the library as the
/// baseline's source pool.
pub fn calibration_terms(dataset: &Dataset, samples: usize, s: f64, seed: u64) -> Result<Vec<(f64, f64)>> {
    let skills = dataset.library.skills();
    if skills.len() < 2 {
        return Err(Error::Library("calibration needs >= 2 skills".into()));
    }
    let unit = RewardConfig { a: 1.0, b: 1.0 };
    (0..samples)
        .into_par_iter()
        .map(|j| {
            let target = &skills[j % skills.len()];
            let pool = dataset.library.without(&target.id);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[j as u64, STREAM_CALIBRATION]));
            let init = baseline_init(&pool, s, &mut rng)?;
            let theta = init.search_distribution()?.sample_n(1, &mut rng)?.remove(0);
            let objective = PushObjective::new(dataset, &target.descriptor, unit)?;
            let r = objective.rollout(&theta)?;
            Ok((task_term(&target.descriptor, &r.object_path)?, push_term(&r.ee_path, &r.object_path)?))
        })
        .collect()
}

/// Fits `a`, `b` so the task term averages `ratio` times the push term over
/// [`calibration_terms`].
pub fn calibrate_dataset(dataset: &Dataset, samples: usize, s: f64, ratio: f64, seed: u64) -> Result<RewardConfig> {
    calibrate_from_terms(&calibration_terms(dataset, samples, s, seed)?, ratio)
}
