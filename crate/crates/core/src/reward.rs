//! Episode reward for pushing rollouts.
//!
//! The raw terms are Euclidean distances over the whole stacked path: the
//! object path against the task descriptor, and the end-effector path
//! against the object path. They are negated so that the optimizer
//! maximizes and zero is the (unreachable) optimum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::{Point, RolloutResult};
use crate::skill_library::{path_distance, TaskDescriptor};

/// Mean task term is this many times the mean push term after calibration.
pub const DEFAULT_TERM_RATIO: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// Weight of the task-tracking term.
    pub a: f64,
    /// Weight of the pushing-proximity term.
    pub b: f64,
}

impl RewardConfig {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        let c = Self { a, b };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.a > 0.0 && self.b > 0.0 && self.a.is_finite() && self.b.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "reward weights must be positive, got a={} b={}",
                self.a, self.b
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub task_distance: f64,
    pub push_distance: f64,
    pub total: f64,
}

/// `‖T* − o‖₂` over all steps and both coordinates.
pub fn task_term(target: &TaskDescriptor, object_path: &[Point]) -> Result<f64> {
    path_distance(target.points(), object_path)
}

/// `‖e − o‖₂` over all steps and both coordinates.
pub fn push_term(ee_path: &[Point], object_path: &[Point]) -> Result<f64> {
    path_distance(ee_path, object_path)
}

/// Composition with weights that need not be positive (`b = 0` isolates the task term).
pub fn combine_terms(task_distance: f64, push_distance: f64, a: f64, b: f64) -> RewardBreakdown {
    RewardBreakdown {
        task_distance,
        push_distance,
        total: -(a * task_distance + b * push_distance),
    }
}

pub fn accumulated_reward(target: &TaskDescriptor, rollout: &RolloutResult, config: &RewardConfig) -> Result<RewardBreakdown> {
    let task = task_term(target, &rollout.object_path)?;
    let push = push_term(&rollout.ee_path, &rollout.object_path)?;
    Ok(combine_terms(task, push, config.a, config.b))
}

/// Fixes `a = 1` and picks `b` so that `a·mean(r^T) = ratio·b·mean(r^p)`
/// on the given rollouts.
pub fn calibrate_ab(samples: &[(TaskDescriptor, RolloutResult)], ratio: f64) -> Result<RewardConfig> {
    let terms = samples
        .iter()
        .map(|(target, r)| Ok((task_term(target, &r.object_path)?, push_term(&r.ee_path, &r.object_path)?)))
        .collect::<Result<Vec<_>>>()?;
    calibrate_from_terms(&terms, ratio)
}

/// [`calibrate_ab`] on precomputed `(task, push)` distance pairs.
pub fn calibrate_from_terms(terms: &[(f64, f64)], ratio: f64) -> Result<RewardConfig> {
    if terms.is_empty() {
        return Err(Error::InvalidArgument("calibration needs >= 1 rollout".into()));
    }
    if !(ratio > 0.0) {
        return Err(Error::InvalidArgument(format!("ratio must be > 0, got {ratio}")));
    }
    let n = terms.len() as f64;
    let mean_task = terms.iter().map(|t| t.0).sum::<f64>() / n;
    let mean_push = terms.iter().map(|t| t.1).sum::<f64>() / n;
    if !(mean_push > 0.0) {
        return Err(Error::InvalidArgument("mean push distance is zero".into()));
    }
    RewardConfig::new(1.0, mean_task / (ratio * mean_push))
}
