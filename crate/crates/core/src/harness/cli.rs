//! Command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::optimizer::{write_curve_csv, RepsConfig};
use crate::reward::{RewardConfig, DEFAULT_TERM_RATIO};
use crate::simulator::SimConfig;
use crate::skill_library::TransferMode;

use super::aggregate::{aggregate, write_aggregate_csv, write_summary_csv};
use super::dataset::{generate_dataset_with, load_dataset, save_dataset, Dataset, DatasetParams, Variant};
use super::experiment::{
    assign_thresholds, calibrate_dataset, run_transfer_experiment, ExperimentConfig, RunRecord, LARGE_LIBRARY,
};
use super::plot::figures;

pub const RECORDS_FILE: &str = "records.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const RUNS_DIR: &str = "runs";
pub const PLOTS_DIR: &str = "plots";

const DEFAULT_DATA_SEED: u64 = 7;
const CALIBRATION_SAMPLES: usize = 100;

#[derive(Parser, Debug)]
#[command(name = "skill-transfer", version, about = "Skill transfer experiments on a planar pushing task")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a ten-skill dataset.
    GenData {
        #[arg(long)]
        variant: Variant,
        #[arg(long, default_value_t = DEFAULT_DATA_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit reward weights on rollouts from the baseline initialization.
    Calibrate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = CALIBRATION_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        s: f64,
    },
    /// Run the transfer matrix described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Recompute aggregate and summary tables from `records.json`.
    Aggregate {
        #[arg(long)]
        out: PathBuf,
    },
    /// Render learning-curve SVGs from `records.json`.
    Plot {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// `N` as a number, or `"k"` for the small-library setting `N = k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LibrarySize {
    Fixed(usize),
    Named(String),
}

impl LibrarySize {
    fn resolve(&self, k: usize) -> Result<usize> {
        match self {
            LibrarySize::Fixed(n) => Ok(*n),
            LibrarySize::Named(s) if s == "k" => Ok(k),
            LibrarySize::Named(s) => Err(Error::Config(format!("library_size must be a number or \"k\", got {s:?}"))),
        }
    }
}

fn default_library_size() -> OneOrMany<LibrarySize> {
    OneOrMany::One(LibrarySize::Fixed(LARGE_LIBRARY))
}

fn default_data_seed() -> u64 {
    DEFAULT_DATA_SEED
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

/// Contents of the `run --config` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub dataset: OneOrMany<Variant>,
    pub mode: OneOrMany<TransferMode>,
    pub k: OneOrMany<usize>,
    #[serde(default = "default_library_size")]
    pub library_size: OneOrMany<LibrarySize>,
    pub num_iterations: usize,
    pub samples_per_iteration: usize,
    pub epsilon: f64,
    pub s: f64,
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_data_seed")]
    pub data_seed: u64,
    /// Directory holding pre-generated datasets as `<dir>/<variant>/`.
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
    #[serde(default)]
    pub simulator: Option<SimConfig>,
    /// Fixed weights; calibrated per dataset when absent.
    #[serde(default)]
    pub reward: Option<RewardConfig>,
    #[serde(default)]
    pub eta_min: Option<f64>,
    #[serde(default)]
    pub cov_floor: Option<f64>,
}

impl RunFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
    }

    /// Expands the matrix; combinations with `k > N` are skipped.
    pub fn experiments(&self) -> Result<Vec<ExperimentConfig>> {
        let defaults = RepsConfig::default();
        let mut out = Vec::new();
        for dataset in self.dataset.to_vec() {
            for size in self.library_size.to_vec() {
                for k in self.k.to_vec() {
                    let library_size = size.resolve(k)?;
                    if k > library_size {
                        continue;
                    }
                    for mode in self.mode.to_vec() {
                        let cfg = ExperimentConfig {
                            dataset,
                            mode,
                            k,
                            library_size,
                            num_iterations: self.num_iterations,
                            samples_per_iteration: self.samples_per_iteration,
                            epsilon: self.epsilon,
                            s: self.s,
                            seeds: self.seeds.clone(),
                            eta_min: self.eta_min.unwrap_or(defaults.eta_min),
                            cov_floor: self.cov_floor.unwrap_or(defaults.cov_floor),
                        };
                        cfg.validate()?;
                        if library_size > LARGE_LIBRARY {
                            return Err(Error::Config(format!(
                                "library_size {library_size} exceeds the {LARGE_LIBRARY} non-target skills"
                            )));
                        }
                        out.push(cfg);
                    }
                }
            }
        }
        if out.is_empty() {
            return Err(Error::Config("config expands to no valid (mode, k, library_size) combination".into()));
        }
        Ok(out)
    }

    pub fn sha256(&self) -> String {
        let canonical = serde_json::to_string(self).expect("run file serializes");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Serialize)]
struct ManifestDataset {
    variant: Variant,
    seed: u64,
    reward: RewardConfig,
}

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    dataset: Variant,
    mode: TransferMode,
    k: usize,
    library_size: usize,
    target: String,
    seed: u64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config_sha256: &'a str,
    config: &'a RunFile,
    datasets: Vec<ManifestDataset>,
    num_records: usize,
    records: Vec<ManifestEntry>,
}

fn load_or_generate(file: &RunFile, variant: Variant) -> Result<Dataset> {
    let dataset = match &file.data_dir {
        Some(dir) => load_dataset(&dir.join(variant.as_str()))?,
        None => {
            let params = DatasetParams {
                sim: file.simulator.clone().unwrap_or_default(),
                ..DatasetParams::default()
            };
            generate_dataset_with(&params, variant, file.data_seed)?
        }
    };
    if dataset.variant != variant {
        return Err(Error::Config(format!("dataset under {variant} holds variant {}", dataset.variant)));
    }
    if let Some(sim) = &file.simulator {
        if *sim != dataset.sim {
            return Err(Error::Config(format!(
                "simulator block differs from the one dataset {variant} was generated with"
            )));
        }
    }
    Ok(dataset)
}

fn run_file_name(r: &RunRecord) -> String {
    format!(
        "{}_{}_k{}_N{}_{}_s{}.csv",
        r.config.dataset, r.config.mode, r.config.k, r.config.library_size, r.target_skill_id, r.seed
    )
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_tables(out: &Path, records: &[RunRecord]) -> Result<()> {
    let groups = aggregate(records)?;
    let mut buf = Vec::new();
    write_aggregate_csv(&mut buf, &groups).map_err(|e| Error::io(out, e))?;
    write_file(&out.join(AGGREGATE_FILE), &buf)?;
    buf.clear();
    write_summary_csv(&mut buf, &groups).map_err(|e| Error::io(out, e))?;
    write_file(&out.join(SUMMARY_FILE), &buf)
}

fn write_plots(out: &Path, records: &[RunRecord]) -> Result<usize> {
    let groups = aggregate(records)?;
    let dir = out.join(PLOTS_DIR);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let figs = figures(&groups);
    for (name, svg) in &figs {
        write_file(&dir.join(name), svg.as_bytes())?;
    }
    Ok(figs.len())
}

fn read_records(out: &Path) -> Result<Vec<RunRecord>> {
    let path = out.join(RECORDS_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(&path, e))
}

/// Runs the whole matrix in memory, then writes every output.
pub fn run_command(config_path: &Path, out_override: Option<&Path>) -> Result<PathBuf> {
    let file = RunFile::load(config_path)?;
    let experiments = file.experiments()?;
    if let Some(reward) = &file.reward {
        reward.validate()?;
    }
    let hash = file.sha256();
    let out = out_override.map(Path::to_path_buf).unwrap_or_else(|| file.output_dir.clone());

    let mut variants: Vec<Variant> = experiments.iter().map(|e| e.dataset).collect();
    variants.sort();
    variants.dedup();
    let mut datasets = Vec::new();
    for v in variants {
        let dataset = load_or_generate(&file, v)?;
        let reward = match file.reward {
            Some(r) => r,
            None => calibrate_dataset(&dataset, CALIBRATION_SAMPLES, file.s, DEFAULT_TERM_RATIO, file.data_seed)?,
        };
        datasets.push((dataset, reward));
    }

    let mut records = Vec::new();
    for cfg in &experiments {
        let (dataset, reward) = datasets.iter().find(|(d, _)| d.variant == cfg.dataset).expect("loaded above");
        records.extend(run_transfer_experiment(cfg, dataset, *reward)?);
    }
    assign_thresholds(&mut records);

    let runs = out.join(RUNS_DIR);
    fs::create_dir_all(&runs).map_err(|e| Error::io(&runs, e))?;
    let mut entries = Vec::with_capacity(records.len());
    for r in &records {
        let reward = datasets.iter().find(|(d, _)| d.variant == r.config.dataset).map(|d| d.1).expect("loaded above");
        let preamble = [
            format!("config_sha256: {hash}"),
            format!("reward: a={} b={}", reward.a, reward.b),
            format!(
                "dataset={} mode={} k={} library_size={} target={} seed={} sources={}",
                r.config.dataset,
                r.config.mode,
                r.config.k,
                r.config.library_size,
                r.target_skill_id,
                r.seed,
                r.source_ids.join(";")
            ),
        ];
        let name = run_file_name(r);
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &r.curve, &preamble).map_err(|e| Error::io(&runs, e))?;
        write_file(&runs.join(&name), &buf)?;
        entries.push(ManifestEntry {
            file: format!("{RUNS_DIR}/{name}"),
            dataset: r.config.dataset,
            mode: r.config.mode,
            k: r.config.k,
            library_size: r.config.library_size,
            target: r.target_skill_id.clone(),
            seed: r.seed,
        });
    }
    let records_json = serde_json::to_string_pretty(&records).expect("records serialize");
    write_file(&out.join(RECORDS_FILE), records_json.as_bytes())?;
    let manifest = Manifest {
        config_sha256: &hash,
        config: &file,
        datasets: datasets
            .iter()
            .map(|(d, r)| ManifestDataset { variant: d.variant, seed: d.seed, reward: *r })
            .collect(),
        num_records: records.len(),
        records: entries,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&out.join(MANIFEST_FILE), manifest_json.as_bytes())?;
    write_tables(&out, &records)?;
    write_plots(&out, &records)?;
    Ok(out)
}

fn dispatch(cli: Cli) -> Result<()> {
    let stdout = std::io::stdout();
    match cli.command {
        Command::GenData { variant, seed, out } => {
            let dataset = generate_dataset_with(&DatasetParams::default(), variant, seed)?;
            save_dataset(&dataset, &out)?;
            let _ = writeln!(stdout.lock(), "wrote dataset {variant} (seed {seed}) to {}", out.display());
        }
        Command::Calibrate { data, samples, seed, s } => {
            let dataset = load_dataset(&data)?;
            let reward = calibrate_dataset(&dataset, samples, s, DEFAULT_TERM_RATIO, seed)?;
            let _ = writeln!(stdout.lock(), "{}", serde_json::to_string(&reward).expect("reward serializes"));
        }
        Command::Run { config, out, jobs } => {
            let run = || run_command(&config, out.as_deref());
            let dir = match jobs {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?
                    .install(run)?,
                None => run()?,
            };
            let _ = writeln!(stdout.lock(), "wrote results to {}", dir.display());
        }
        Command::Aggregate { out } => {
            let records = read_records(&out)?;
            write_tables(&out, &records)?;
        }
        Command::Plot { out } => {
            let records = read_records(&out)?;
            let n = write_plots(&out, &records)?;
            let _ = writeln!(stdout.lock(), "wrote {n} plots to {}", out.join(PLOTS_DIR).display());
        }
    }
    Ok(())
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
