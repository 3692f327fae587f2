//! Reduction of run records into per-group learning curves and metrics.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::skill_library::TransferMode;

use super::dataset::Variant;
use super::experiment::{ExperimentConfig, RunRecord};

pub const AGGREGATE_CSV_HEADER: &str = "mode,k,dataset,iteration,mean,std,library_size";
pub const SUMMARY_CSV_HEADER: &str =
    "dataset,mode,k,library_size,records,final_mean,final_std,mean_iterations_to_threshold,mean_initial_reward,mean_similarity";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct GroupKey {
    pub dataset: Variant,
    pub mode: TransferMode,
    pub k: usize,
    pub library_size: usize,
}

impl GroupKey {
    pub fn of(config: &ExperimentConfig) -> Self {
        Self {
            dataset: config.dataset,
            mode: config.mode,
            k: config.k,
            library_size: config.library_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub key: GroupKey,
    pub num_records: usize,
    /// Mean of `mean_reward` per iteration across targets and seeds.
    pub mean_curve: Vec<f64>,
    /// Population standard deviation matching `mean_curve`.
    pub std_curve: Vec<f64>,
    pub final_mean: f64,
    pub final_std: f64,
    /// Absent when no record in the group has a threshold.
    pub mean_iterations_to_threshold: Option<f64>,
    pub mean_initial_reward: f64,
    pub mean_similarity: f64,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn summarize(key: GroupKey, records: &[&RunRecord]) -> Result<GroupSummary> {
    let first = records[0];
    for r in &records[1..] {
        if r.config != first.config {
            return Err(Error::Config(format!(
                "group {}/{}/k={}/N={} mixes different configurations",
                key.dataset, key.mode, key.k, key.library_size
            )));
        }
    }
    let len = first.curve.len();
    if len == 0 || records.iter().any(|r| r.curve.len() != len) {
        return Err(Error::Config("records of one group must share a nonempty curve length".into()));
    }
    let (mean_curve, std_curve): (Vec<f64>, Vec<f64>) =
        (0..len).map(|i| mean_std(records.iter().map(move |r| r.curve[i].mean_reward))).unzip();
    let thresholds: Vec<f64> = records.iter().filter_map(|r| r.iterations_to_threshold.map(|t| t as f64)).collect();
    Ok(GroupSummary {
        key,
        num_records: records.len(),
        final_mean: mean_curve[len - 1],
        final_std: std_curve[len - 1],
        mean_curve,
        std_curve,
        mean_iterations_to_threshold: if thresholds.is_empty() {
            None
        } else {
            Some(thresholds.iter().sum::<f64>() / thresholds.len() as f64)
        },
        mean_initial_reward: mean_std(records.iter().map(|r| r.initial_reward)).0,
        mean_similarity: mean_std(records.iter().map(|r| r.similarity())).0,
    })
}

/// One summary per (dataset, mode, k, library size), in key order.
pub fn aggregate(records: &[RunRecord]) -> Result<Vec<GroupSummary>> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("nothing to aggregate".into()));
    }
    let mut groups: BTreeMap<GroupKey, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(GroupKey::of(&r.config)).or_default().push(r);
    }
    groups.into_iter().map(|(key, rs)| summarize(key, &rs)).collect()
}

pub fn write_aggregate_csv<W: Write>(mut out: W, groups: &[GroupSummary]) -> std::io::Result<()> {
    writeln!(out, "{AGGREGATE_CSV_HEADER}")?;
    for g in groups {
        for (i, (m, s)) in g.mean_curve.iter().zip(&g.std_curve).enumerate() {
            writeln!(
                out,
                "{},{},{},{},{m},{s},{}",
                g.key.mode,
                g.key.k,
                g.key.dataset,
                i + 1,
                g.key.library_size
            )?;
        }
    }
    Ok(())
}

pub fn write_summary_csv<W: Write>(mut out: W, groups: &[GroupSummary]) -> std::io::Result<()> {
    writeln!(out, "{SUMMARY_CSV_HEADER}")?;
    for g in groups {
        let itt = g.mean_iterations_to_threshold.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{itt},{},{}",
            g.key.dataset,
            g.key.mode,
            g.key.k,
            g.key.library_size,
            g.num_records,
            g.final_mean,
            g.final_std,
            g.mean_initial_reward,
            g.mean_similarity
        )?;
    }
    Ok(())
}
