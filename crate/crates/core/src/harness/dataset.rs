//! Synthetic pushing datasets.
//!
//! Ten straight pushes fan out from a common object start position. Variant
//! A starts with the gripper touching the object; variant B starts with the
//! gripper retracted toward the arm base.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::movement_primitives::{fit_promp, BasisSet, DEFAULT_COV_REG, DEFAULT_RIDGE};
use crate::simulator::{ik_solve, scripted_push_demo, ArmModel, Point, SimConfig, WorldState};
use crate::skill_library::{load_library, save_library, Skill, SkillLibrary, TaskDescriptor};

use super::derive_seed;

pub const LIBRARY_FILE: &str = "library.json";
pub const DATASET_FILE: &str = "dataset.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    A,
    B,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::A => "A",
            Variant::B => "B",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Variant::A),
            "B" | "b" => Ok(Variant::B),
            other => Err(Error::InvalidArgument(format!("unknown dataset variant `{other}`"))),
        }
    }
}

/// Geometry and synthesis settings for [`generate_dataset_with`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetParams {
    pub arm: ArmModel,
    pub sim: SimConfig,
    pub object_start: Point,
    /// Length of every push (m).
    pub push_length: f64,
    pub num_tasks: usize,
    /// Half-width of the fan of push directions around the base-to-object ray (rad).
    pub fan_half_angle: f64,
    pub demos_per_skill: usize,
    /// Standard deviation of the smooth joint noise added to demonstrations (rad).
    pub demo_noise: f64,
    pub num_basis: usize,
    /// Normalized time at which the object starts moving, per variant.
    pub push_onset_a: f64,
    pub push_onset_b: f64,
    /// Normalized time at which the push is complete.
    pub push_end: f64,
    /// Extra end-effector retraction of variant B's start pose (m).
    pub retract_b: f64,
    /// IK seed for the start pose.
    pub start_seed: [f64; 3],
}

impl Default for DatasetParams {
    fn default() -> Self {
        Self {
            arm: ArmModel::default(),
            sim: SimConfig::default(),
            object_start: [0.0, 0.45],
            push_length: 0.15,
            num_tasks: 10,
            fan_half_angle: 81f64.to_radians(),
            demos_per_skill: 5,
            demo_noise: 0.02,
            num_basis: 6,
            push_onset_a: 0.25,
            push_onset_b: 0.35,
            push_end: 0.95,
            retract_b: 0.17,
            start_seed: [0.6, 1.2, 0.9],
        }
    }
}

impl DatasetParams {
    fn onset(&self, variant: Variant) -> f64 {
        match variant {
            Variant::A => self.push_onset_a,
            Variant::B => self.push_onset_b,
        }
    }

    fn radial(&self) -> [f64; 2] {
        let dx = self.object_start[0] - self.arm.base_position[0];
        let dy = self.object_start[1] - self.arm.base_position[1];
        let n = (dx * dx + dy * dy).sqrt();
        [dx / n, dy / n]
    }

    /// Push direction angles, evenly spaced across the fan.
    pub fn push_angles(&self) -> Vec<f64> {
        let r = self.radial();
        let center = r[1].atan2(r[0]);
        let n = self.num_tasks;
        (0..n)
            .map(|i| {
                let frac = if n == 1 { 0.5 } else { i as f64 / (n - 1) as f64 };
                center - self.fan_half_angle + 2.0 * self.fan_half_angle * frac
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub variant: Variant,
    pub seed: u64,
    pub start_state: WorldState,
    pub arm: ArmModel,
    pub sim: SimConfig,
    pub library: SkillLibrary,
}

impl Dataset {
    /// Distance between the end-effector and object centers at the start.
    pub fn start_gap(&self) -> f64 {
        let ee = crate::simulator::end_effector(&self.arm, self.start_state.joint_angles);
        let o = self.start_state.object_center;
        ((ee[0] - o[0]).powi(2) + (ee[1] - o[1]).powi(2)).sqrt()
    }
}

fn min_jerk(h: f64) -> f64 {
    let h = h.clamp(0.0, 1.0);
    h * h * h * (10.0 - 15.0 * h + 6.0 * h * h)
}

/// Object path that rests until `onset`, then pushes `length` along `angle`
/// with a minimum-jerk profile until `end` (normalized time).
pub fn straight_push(start: Point, angle: f64, length: f64, num_steps: usize, onset: f64, end: f64) -> TaskDescriptor {
    let (s, c) = angle.sin_cos();
    let points = (0..num_steps)
        .map(|t| {
            let z = t as f64 / (num_steps - 1) as f64;
            let h = if z <= onset { 0.0 } else { min_jerk((z - onset) / (end - onset)) };
            [start[0] + length * h * c, start[1] + length * h * s]
        })
        .collect();
    TaskDescriptor::new(points).expect("generated paths are finite and long enough")
}

pub fn start_state(params: &DatasetParams, variant: Variant) -> Result<WorldState> {
    let r = params.radial();
    let back = params.sim.contact_distance()
        + match variant {
            Variant::A => 0.0,
            Variant::B => params.retract_b,
        };
    let ee = [params.object_start[0] - back * r[0], params.object_start[1] - back * r[1]];
    let q = ik_solve(&params.arm, ee, params.start_seed, 1e-10, 500)?.q;
    Ok(WorldState {
        joint_angles: q,
        object_center: params.object_start,
    })
}

pub fn generate_dataset(variant: Variant, seed: u64) -> Result<Dataset> {
    generate_dataset_with(&DatasetParams::default(), variant, seed)
}

/// Builds the ten-skill library for one variant.
pub fn generate_dataset_with(params: &DatasetParams, variant: Variant, seed: u64) -> Result<Dataset> {
    params.arm.validate()?;
    params.sim.validate()?;
    if params.push_end <= params.onset(variant) || params.push_end > 1.0 {
        return Err(Error::InvalidArgument("push_end must lie after the push onset and <= 1".into()));
    }
    let start = start_state(params, variant)?;
    let basis = BasisSet::new(params.num_basis, params.sim.num_steps)?;
    let mut skills = Vec::with_capacity(params.num_tasks);
    for (i, angle) in params.push_angles().into_iter().enumerate() {
        let descriptor = straight_push(
            params.object_start,
            angle,
            params.push_length,
            params.sim.num_steps,
            params.onset(variant),
            params.push_end,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[variant as u64, i as u64, 0xDE40]));
        let demos = (0..params.demos_per_skill)
            .map(|_| {
                scripted_push_demo(
                    &params.arm,
                    &params.sim,
                    &descriptor,
                    &start,
                    params.sim.contact_distance(),
                    params.demo_noise,
                    &mut rng,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let promp = fit_promp(&demos, &basis, DEFAULT_RIDGE, DEFAULT_COV_REG)?;
        skills.push(Skill {
            id: format!("{variant}{i:02}"),
            promp,
            descriptor,
        });
    }
    Ok(Dataset {
        variant,
        seed,
        start_state: start,
        arm: params.arm.clone(),
        sim: params.sim.clone(),
        library: SkillLibrary::from_skills(skills)?,
    })
}

#[derive(Serialize, Deserialize)]
struct DatasetMeta {
    variant: Variant,
    seed: u64,
    start_state: WorldState,
    arm: ArmModel,
    sim: SimConfig,
}

/// Writes `dataset.json` and `library.json` into `dir`.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = DatasetMeta {
        variant: dataset.variant,
        seed: dataset.seed,
        start_state: dataset.start_state.clone(),
        arm: dataset.arm.clone(),
        sim: dataset.sim.clone(),
    };
    let path = dir.join(DATASET_FILE);
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::parse(&path, e))?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    save_library(&dataset.library, &dir.join(LIBRARY_FILE))
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let path = dir.join(DATASET_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let meta: DatasetMeta = serde_json::from_str(&text).map_err(|e| Error::parse(&path, e))?;
    meta.arm.validate()?;
    meta.sim.validate()?;
    let library = load_library(&dir.join(LIBRARY_FILE))?;
    if let Some(s) = library.skills().first() {
        if s.descriptor.num_steps() != meta.sim.num_steps {
            return Err(Error::Library("library descriptors do not match the simulator step count".into()));
        }
    }
    Ok(Dataset {
        variant: meta.variant,
        seed: meta.seed,
        start_state: meta.start_state,
        arm: meta.arm,
        sim: meta.sim,
        library,
    })
}
