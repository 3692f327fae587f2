//! Skill storage, source selection and search-distribution initialization.
//!
//! A skill pairs a ProMP over joint-trajectory weights with a task
//! descriptor (the object path it produces). New tasks borrow from the `k`
//! skills whose descriptors are closest to the target descriptor.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::movement_primitives::ProMP;
use crate::optimizer::SearchDistribution;

pub const LIBRARY_FORMAT_VERSION: u32 = 1;

/// Desired or observed object path, one `[x, y]` per step (meters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct TaskDescriptor {
    points: Vec<[f64; 2]>,
}

impl TaskDescriptor {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "task descriptor needs >= 2 steps, got {}",
                points.len()
            )));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("task descriptor has non-finite entries".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn num_steps(&self) -> usize {
        self.points.len()
    }
}

impl TryFrom<Vec<[f64; 2]>> for TaskDescriptor {
    type Error = Error;

    fn try_from(points: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<TaskDescriptor> for Vec<[f64; 2]> {
    fn from(d: TaskDescriptor) -> Self {
        d.points
    }
}

/// L2 norm of the stacked difference of two equally long point paths.
pub fn path_distance(a: &[[f64; 2]], b: &[[f64; 2]]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "path lengths",
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(a.iter()
        .zip(b)
        .map(|(p, q)| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// Euclidean distance between descriptors; no time alignment.
pub fn descriptor_distance(a: &TaskDescriptor, b: &TaskDescriptor) -> Result<f64> {
    path_distance(&a.points, &b.points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skill {
    pub id: String,
    pub promp: ProMP,
    pub descriptor: TaskDescriptor,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SkillLibrary {
    skills: Vec<Skill>,
}

impl SkillLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a library, checking id uniqueness and shape consistency.
    pub fn from_skills(skills: Vec<Skill>) -> Result<Self> {
        let mut lib = Self::new();
        for skill in skills {
            lib.check_compatible(&skill)?;
            lib.skills.push(skill);
        }
        Ok(lib)
    }

    pub fn skills(&self) -> &[Skill] {
        &self.skills
    }

    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Skill> {
        self.skills.iter().find(|s| s.id == id)
    }

    fn check_compatible(&self, skill: &Skill) -> Result<()> {
        if skill.id.is_empty() {
            return Err(Error::Library("skill id must be nonempty".into()));
        }
        if self.get(&skill.id).is_some() {
            return Err(Error::DuplicateId(skill.id.clone()));
        }
        if let Some(first) = self.skills.first() {
            if first.descriptor.num_steps() != skill.descriptor.num_steps() {
                return Err(Error::DimensionMismatch {
                    context: "descriptor steps",
                    expected: first.descriptor.num_steps(),
                    actual: skill.descriptor.num_steps(),
                });
            }
            if first.promp.basis() != skill.promp.basis() || first.promp.num_dims() != skill.promp.num_dims() {
                return Err(Error::Library(format!(
                    "skill `{}` uses a different basis or dimension count",
                    skill.id
                )));
            }
        }
        Ok(())
    }

    /// Returns a new library with `skill` appended.
    pub fn add_skill(&self, skill: Skill) -> Result<Self> {
        self.check_compatible(&skill)?;
        let mut skills = self.skills.clone();
        skills.push(skill);
        Ok(Self { skills })
    }

    /// Library without the skill `id` (order preserved).
    pub fn without(&self, id: &str) -> Self {
        Self {
            skills: self.skills.iter().filter(|s| s.id != id).cloned().collect(),
        }
    }

    /// Library restricted to the given ids, in library order.
    pub fn subset(&self, ids: &[&str]) -> Self {
        Self {
            skills: self.skills.iter().filter(|s| ids.contains(&s.id.as_str())).cloned().collect(),
        }
    }
}

/// The `k` skills closest to `target`, nearest first; ties keep library order.
pub fn knn_select<'a>(library: &'a SkillLibrary, target: &TaskDescriptor, k: usize) -> Result<Vec<&'a Skill>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if k > library.len() {
        return Err(Error::KTooLarge { k, size: library.len() });
    }
    let mut ranked = library
        .skills
        .iter()
        .map(|s| descriptor_distance(&s.descriptor, target).map(|d| (d, s)))
        .collect::<Result<Vec<_>>>()?;
    // stable sort keeps insertion order for ties
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(ranked.into_iter().take(k).map(|(_, s)| s).collect())
}

/// Mean of the sources' means and the moment-matched covariance of their
/// equal-weight mixture.
pub fn combine_sources(skills: &[&Skill]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let first = skills
        .first()
        .ok_or_else(|| Error::InvalidArgument("combine_sources needs >= 1 skill".into()))?;
    let d = first.promp.dim();
    if let Some(s) = skills.iter().find(|s| s.promp.dim() != d) {
        return Err(Error::DimensionMismatch {
            context: "source ProMP dimension",
            expected: d,
            actual: s.promp.dim(),
        });
    }
    if skills.len() == 1 {
        return Ok((first.promp.mean().clone(), first.promp.covariance().clone()));
    }
    let k = skills.len() as f64;
    let mean = skills.iter().fold(DVector::zeros(d), |acc, s| acc + s.promp.mean()) / k;
    let mut cov = skills.iter().fold(DMatrix::zeros(d, d), |acc, s| acc + s.promp.covariance()) / k;
    for s in skills {
        let c = s.promp.mean() - &mean;
        cov.ger(1.0 / k, &c, &c, 1.0);
    }
    Ok((mean, linalg::symmetrize(&cov)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransferMode {
    Partial,
    Full,
    Baseline,
}

impl TransferMode {
    pub const ALL: [TransferMode; 3] = [TransferMode::Partial, TransferMode::Full, TransferMode::Baseline];

    pub fn as_str(self) -> &'static str {
        match self {
            TransferMode::Partial => "partial",
            TransferMode::Full => "full",
            TransferMode::Baseline => "baseline",
        }
    }
}

impl fmt::Display for TransferMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TransferMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "partial" => Ok(TransferMode::Partial),
            "full" => Ok(TransferMode::Full),
            "baseline" => Ok(TransferMode::Baseline),
            other => Err(Error::InvalidArgument(format!("unknown transfer mode `{other}`"))),
        }
    }
}

/// Initial REPS search distribution built from library knowledge.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferInit {
    pub mode: TransferMode,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub source_ids: Vec<String>,
}

impl TransferInit {
    pub fn search_distribution(&self) -> Result<SearchDistribution> {
        SearchDistribution::new(self.mean.clone(), self.covariance.clone())
    }

    pub fn with_sources(mut self, skills: &[&Skill]) -> Self {
        self.source_ids = skills.iter().map(|s| s.id.clone()).collect();
        self
    }
}

fn check_scale(s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("scale s must be > 0, got {s}")))
    }
}

/// Source mean with isotropic covariance `s·I`.
pub fn partial_init(mean_k: &DVector<f64>, s: f64) -> Result<TransferInit> {
    check_scale(s)?;
    let d = mean_k.len();
    Ok(TransferInit {
        mode: TransferMode::Partial,
        mean: mean_k.clone(),
        covariance: DMatrix::identity(d, d) * s,
        source_ids: Vec::new(),
    })
}

/// Source mean with the source covariance rescaled so its largest variance
/// (diagonal entry) equals `s`.
pub fn full_init(mean_k: &DVector<f64>, cov_k: &DMatrix<f64>, s: f64) -> Result<TransferInit> {
    check_scale(s)?;
    let d = mean_k.len();
    if cov_k.nrows() != d || cov_k.ncols() != d {
        return Err(Error::DimensionMismatch {
            context: "source covariance",
            expected: d,
            actual: cov_k.nrows(),
        });
    }
    let max_diag = cov_k.diagonal().max();
    if !(max_diag > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "source covariance has non-positive max variance {max_diag}"
        )));
    }
    let mut covariance = linalg::symmetrize(&(cov_k * (s / max_diag)));
    // scaling is exact up to rounding; pin the largest variance to s
    let idx = cov_k.diagonal().imax();
    covariance[(idx, idx)] = s;
    Ok(TransferInit {
        mode: TransferMode::Full,
        mean: mean_k.clone(),
        covariance,
        source_ids: Vec::new(),
    })
}

/// Per-weight blend factors `λ_i = ψ_0^i / max ψ_0`, broadcast over dimensions.
pub fn baseline_blend(library: &SkillLibrary) -> Result<DVector<f64>> {
    let first = library
        .skills
        .first()
        .ok_or_else(|| Error::Library("baseline needs a nonempty library".into()))?;
    let basis = first.promp.basis();
    let psi0 = basis.row(0);
    let lambda = &psi0 / psi0.max();
    let nb = basis.num_basis();
    Ok(DVector::from_fn(first.promp.dim(), |i, _| lambda[i % nb]))
}

/// Baseline without source knowledge: `λ·μ_N + (1−λ)·μ_r` with covariance `s·I`.
///
/// `μ_N` averages all library means and `μ_r` is drawn per coordinate
/// uniformly between the smallest and largest library mean.
pub fn baseline_init<R: Rng + ?Sized>(library: &SkillLibrary, s: f64, rng: &mut R) -> Result<TransferInit> {
    check_scale(s)?;
    let lambda = baseline_blend(library)?;
    let d = lambda.len();
    let n = library.len() as f64;
    let mean_n = library.skills.iter().fold(DVector::zeros(d), |acc, sk| acc + sk.promp.mean()) / n;
    let random = DVector::from_fn(d, |i, _| {
        let (lo, hi) = library
            .skills
            .iter()
            .map(|sk| sk.promp.mean()[i])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let u: f64 = rng.random();
        lo + u * (hi - lo)
    });
    let mean = DVector::from_fn(d, |i, _| lambda[i] * mean_n[i] + (1.0 - lambda[i]) * random[i]);
    Ok(TransferInit {
        mode: TransferMode::Baseline,
        mean,
        covariance: DMatrix::identity(d, d) * s,
        source_ids: Vec::new(),
    })
}

#[derive(Serialize, Deserialize)]
struct LibraryDoc {
    version: u32,
    skills: Vec<Skill>,
}

/// Serializes a library as its JSON document.
pub fn library_to_json(library: &SkillLibrary) -> Result<String> {
    let doc = LibraryDoc {
        version: LIBRARY_FORMAT_VERSION,
        skills: library.skills.clone(),
    };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Library(e.to_string()))
}

pub fn save_library(library: &SkillLibrary, path: &Path) -> Result<()> {
    let text = library_to_json(library)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Loads and validates a library file; nothing is returned on any error.
pub fn load_library(path: &Path) -> Result<SkillLibrary> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: LibraryDoc = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
    if doc.version != LIBRARY_FORMAT_VERSION {
        return Err(Error::Library(format!(
            "unsupported library version {} (expected {LIBRARY_FORMAT_VERSION})",
            doc.version
        )));
    }
    SkillLibrary::from_skills(doc.skills)
}
