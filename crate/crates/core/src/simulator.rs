//! Planar 3-link arm pushing a disk on a table.
//!
//! The arm tracks joint commands exactly. Contact between the end-effector
//! disk and the object disk is resolved quasi-statically: an overlapping
//! object is projected out along the contact normal and dragged by a
//! fraction `slip` of the tangential end-effector motion. Objects never move
//! on their own.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, Matrix2, Matrix2x3, Vector2, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::movement_primitives::{BasisSet, Trajectory};
use crate::skill_library::TaskDescriptor;

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmModel {
    pub link_lengths: [f64; 3],
    /// `(lower, upper)` per joint, radians.
    pub joint_limits: [(f64, f64); 3],
    pub base_position: Point,
}

impl Default for ArmModel {
    fn default() -> Self {
        Self {
            link_lengths: [0.3, 0.25, 0.15],
            joint_limits: [(-2.9, 2.9); 3],
            base_position: [0.0, 0.0],
        }
    }
}

impl ArmModel {
    pub fn validate(&self) -> Result<()> {
        if self.link_lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument("link lengths must be positive".into()));
        }
        if self.joint_limits.iter().any(|&(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidArgument("joint limits need lower < upper".into()));
        }
        if self.base_position.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("base position must be finite".into()));
        }
        Ok(())
    }

    pub fn reach(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    pub fn clamp(&self, q: [f64; 3]) -> [f64; 3] {
        let mut out = q;
        for (v, &(lo, hi)) in out.iter_mut().zip(&self.joint_limits) {
            *v = v.clamp(lo, hi);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub object_radius: f64,
    /// Effective contact radius of the open gripper.
    pub ee_radius: f64,
    /// Fraction of tangential end-effector motion passed to a touched object.
    pub slip: f64,
    pub dt: f64,
    pub num_steps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            object_radius: 0.04,
            ee_radius: 0.03,
            slip: 0.2,
            dt: 0.004,
            num_steps: 1250,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.object_radius > 0.0 && self.ee_radius > 0.0) {
            return Err(Error::InvalidArgument("contact radii must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.slip) {
            return Err(Error::InvalidArgument(format!("slip must be in [0, 1], got {}", self.slip)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if self.num_steps < 2 {
            return Err(Error::InvalidArgument("num_steps must be >= 2".into()));
        }
        Ok(())
    }

    pub fn contact_distance(&self) -> f64 {
        self.ee_radius + self.object_radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub joint_angles: [f64; 3],
    pub object_center: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    pub ee_path: Vec<Point>,
    pub object_path: Vec<Point>,
    pub joint_path: Vec<[f64; 3]>,
}

impl RolloutResult {
    pub fn num_steps(&self) -> usize {
        self.ee_path.len()
    }

    /// CSV with columns `t,ee_x,ee_y,obj_x,obj_y,q1,q2,q3`; `t` in seconds.
    pub fn write_csv<W: Write>(&self, mut out: W, dt: f64) -> std::io::Result<()> {
        writeln!(out, "t,ee_x,ee_y,obj_x,obj_y,q1,q2,q3")?;
        for (i, ((e, o), q)) in self
            .ee_path
            .iter()
            .zip(&self.object_path)
            .zip(&self.joint_path)
            .enumerate()
        {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                i as f64 * dt,
                e[0],
                e[1],
                o[0],
                o[1],
                q[0],
                q[1],
                q[2]
            )?;
        }
        Ok(())
    }
}

/// Base, elbow, wrist and end-effector positions.
pub fn forward_kinematics(arm: &ArmModel, q: [f64; 3]) -> [Point; 4] {
    let mut points = [arm.base_position; 4];
    let mut angle = 0.0;
    for i in 0..3 {
        angle += q[i];
        points[i + 1] = [
            points[i][0] + arm.link_lengths[i] * angle.cos(),
            points[i][1] + arm.link_lengths[i] * angle.sin(),
        ];
    }
    points
}

pub fn end_effector(arm: &ArmModel, q: [f64; 3]) -> Point {
    forward_kinematics(arm, q)[3]
}

fn jacobian(arm: &ArmModel, q: [f64; 3]) -> Matrix2x3<f64> {
    let mut j = Matrix2x3::zeros();
    let mut angle = 0.0;
    let mut cumulative = [0.0; 3];
    for i in 0..3 {
        angle += q[i];
        cumulative[i] = angle;
    }
    for col in 0..3 {
        for link in col..3 {
            j[(0, col)] -= arm.link_lengths[link] * cumulative[link].sin();
            j[(1, col)] += arm.link_lengths[link] * cumulative[link].cos();
        }
    }
    j
}

fn v2(p: Point) -> Vector2<f64> {
    Vector2::new(p[0], p[1])
}

fn pt(v: Vector2<f64>) -> Point {
    [v[0], v[1]]
}

/// One quasi-static contact resolution.
///
/// If the end-effector disk at `ee_new` overlaps the object, the object is
/// moved along the center-to-center normal by the penetration depth plus
/// `slip` times the tangential part of `ee_new − ee_prev`.
pub fn resolve_contact(ee_prev: Point, ee_new: Point, object: Point, contact_distance: f64, slip: f64) -> Point {
    let e = v2(ee_new);
    let o = v2(object);
    let delta = e - v2(ee_prev);
    let offset = o - e;
    let dist = offset.norm();
    if dist >= contact_distance {
        return object;
    }
    let normal = if dist > 1e-12 {
        offset / dist
    } else if delta.norm() > 1e-12 {
        delta.normalize()
    } else {
        Vector2::new(1.0, 0.0)
    };
    let penetration = contact_distance - dist;
    let tangential = delta - normal * delta.dot(&normal);
    pt(o + normal * penetration + tangential * slip)
}

/// Executes a joint trajectory from `initial`.
pub fn rollout(arm: &ArmModel, sim: &SimConfig, joints: &Trajectory, initial: &WorldState) -> Result<RolloutResult> {
    if joints.num_dims() != 3 {
        return Err(Error::DimensionMismatch {
            context: "rollout joint dimensions",
            expected: 3,
            actual: joints.num_dims(),
        });
    }
    if joints.num_steps() != sim.num_steps {
        return Err(Error::DimensionMismatch {
            context: "rollout steps",
            expected: sim.num_steps,
            actual: joints.num_steps(),
        });
    }
    let values = joints.values();
    let contact = sim.contact_distance();
    let mut ee_prev = end_effector(arm, arm.clamp(initial.joint_angles));
    let mut object = initial.object_center;
    let mut result = RolloutResult {
        ee_path: Vec::with_capacity(sim.num_steps),
        object_path: Vec::with_capacity(sim.num_steps),
        joint_path: Vec::with_capacity(sim.num_steps),
    };
    for t in 0..sim.num_steps {
        let q = arm.clamp([values[(t, 0)], values[(t, 1)], values[(t, 2)]]);
        let ee = end_effector(arm, q);
        object = resolve_contact(ee_prev, ee, object, contact, sim.slip);
        result.ee_path.push(ee);
        result.object_path.push(object);
        result.joint_path.push(q);
        ee_prev = ee;
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSolution {
    pub q: [f64; 3],
    pub residual: f64,
    pub iterations: usize,
}

const IK_DAMPING: f64 = 1e-2;
const IK_MAX_STEP: f64 = 0.5;

/// Damped least-squares inverse kinematics for the end-effector position.
///
/// Iterates from `seed_q` first. If that run stalls (typically against a
/// joint limit), it retries from a fixed list of alternative seeds: the
/// mirrored elbow and a few poses pointing at the target. Each attempt gets
/// `max_iters` iterations.
pub fn ik_solve(arm: &ArmModel, target: Point, seed_q: [f64; 3], tol: f64, max_iters: usize) -> Result<IkSolution> {
    if target.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("IK target must be finite".into()));
    }
    let goal = v2(target);
    let seed = arm.clamp(seed_q);
    let initial_residual = (goal - v2(end_effector(arm, seed))).norm();
    if (goal - v2(arm.base_position)).norm() > arm.reach() + tol {
        return Err(Error::IkFailed { residual: initial_residual, tol, iters: 0 });
    }
    let bearing = (target[1] - arm.base_position[1]).atan2(target[0] - arm.base_position[0]);
    let mut seeds = vec![seed, [seed[0], -seed[1], -seed[2]]];
    for bend in [0.5, -0.5, 1.5, -1.5, 2.5, -2.5] {
        seeds.push([bearing - bend, bend, bend]);
    }
    let mut total_iters = 0;
    let mut best = initial_residual;
    for start in seeds {
        let (sol, iters) = dls(arm, goal, arm.clamp(start), tol, max_iters);
        total_iters += iters;
        if sol.residual <= tol {
            return Ok(IkSolution { iterations: total_iters, ..sol });
        }
        best = best.min(sol.residual);
    }
    Err(Error::IkFailed { residual: best, tol, iters: total_iters })
}

fn dls(arm: &ArmModel, goal: Vector2<f64>, mut q: [f64; 3], tol: f64, max_iters: usize) -> (IkSolution, usize) {
    let damping = Matrix2::identity() * (IK_DAMPING * IK_DAMPING);
    let mut residual = (goal - v2(end_effector(arm, q))).norm();
    let mut iter = 0;
    while iter < max_iters && residual > tol {
        let err = goal - v2(end_effector(arm, q));
        let j = jacobian(arm, q);
        let Some(inv) = (j * j.transpose() + damping).try_inverse() else {
            break;
        };
        let mut dq: Vector3<f64> = j.transpose() * inv * err;
        let norm = dq.norm();
        if norm > IK_MAX_STEP {
            dq *= IK_MAX_STEP / norm;
        }
        q = arm.clamp([q[0] + dq[0], q[1] + dq[1], q[2] + dq[2]]);
        residual = (goal - v2(end_effector(arm, q))).norm();
        iter += 1;
    }
    (IkSolution { q, residual, iterations: iter }, iter)
}

pub const DEMO_IK_TOL: f64 = 1e-7;
const DEMO_IK_ITERS: usize = 200;
/// Extra radius kept while circling the object before the push starts.
const APPROACH_CLEARANCE: f64 = 0.02;
const TANGENT_WINDOW: usize = 5;
const NOISE_KNOTS: usize = 8;
/// Fraction of the episode over which demo noise fades in from zero.
const NOISE_RAMP: f64 = 0.05;

fn min_jerk(h: f64) -> f64 {
    let h = h.clamp(0.0, 1.0);
    h * h * h * (10.0 - 15.0 * h + 6.0 * h * h)
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = (a + PI).rem_euclid(2.0 * PI) - PI;
    if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// End-effector waypoints for pushing along `path`.
///
/// While the desired object is still at rest the end-effector circles the
/// object from its start position to the pre-push pose; afterwards it trails
/// the object by `approach_offset` along the local path tangent.
pub fn push_waypoints(arm: &ArmModel, path: &TaskDescriptor, start: &WorldState, approach_offset: f64) -> Vec<Point> {
    let pts = path.points();
    let n = pts.len();
    let origin = v2(pts[0]);
    let onset = pts
        .iter()
        .position(|p| (v2(*p) - origin).norm() > 1e-9)
        .unwrap_or(n);
    let overall = v2(pts[n - 1]) - origin;
    let fallback = if overall.norm() > 1e-12 {
        overall.normalize()
    } else {
        let radial = origin - v2(arm.base_position);
        if radial.norm() > 1e-12 {
            radial.normalize()
        } else {
            Vector2::new(1.0, 0.0)
        }
    };
    let mut tangents = Vec::with_capacity(n);
    let mut last = fallback;
    for t in 0..n {
        let a = v2(pts[t.saturating_sub(TANGENT_WINDOW)]);
        let b = v2(pts[(t + TANGENT_WINDOW).min(n - 1)]);
        let d = b - a;
        if t >= onset && d.norm() > 1e-9 {
            last = d.normalize();
        }
        tangents.push(if t < onset { fallback } else { last });
    }
    let trail = |t: usize| v2(pts[t]) - tangents[t] * approach_offset;

    let mut waypoints = Vec::with_capacity(n);
    if onset > 0 {
        let start_ee = v2(end_effector(arm, start.joint_angles)) - origin;
        let pre_push = trail(onset.min(n - 1)) - origin;
        let (r0, a0) = (start_ee.norm(), start_ee[1].atan2(start_ee[0]));
        let (r1, a1) = (pre_push.norm(), pre_push[1].atan2(pre_push[0]));
        let sweep = wrap_angle(a1 - a0);
        // Only lift off the object when the approach has to go around it.
        let bump = if sweep.abs() > 1e-6 { APPROACH_CLEARANCE } else { 0.0 };
        for t in 0..onset {
            let h = min_jerk(t as f64 / onset as f64);
            let r = r0 + (r1 - r0) * h + bump * (PI * h).sin();
            let a = a0 + sweep * h;
            waypoints.push(pt(origin + Vector2::new(r * a.cos(), r * a.sin())));
        }
    }
    for t in onset..n {
        waypoints.push(pt(trail(t)));
    }
    waypoints
}

/// Smooth zero-mean joint noise with marginal standard deviation `scale`.
fn smooth_noise<R: Rng + ?Sized>(num_steps: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    let mut noise = DMatrix::zeros(num_steps, 3);
    if scale == 0.0 {
        return noise;
    }
    let basis = BasisSet::new(NOISE_KNOTS, num_steps).expect("fixed knot count is valid");
    let knots = DMatrix::from_fn(NOISE_KNOTS, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
    for t in 0..num_steps {
        let row = basis.row(t);
        let norm = row.norm();
        let z = t as f64 / (num_steps - 1) as f64;
        let ramp = if z < NOISE_RAMP { (0.5 * PI * z / NOISE_RAMP).sin() } else { 1.0 };
        for j in 0..3 {
            noise[(t, j)] = scale * ramp * row.dot(&knots.column(j)) / norm;
        }
    }
    noise
}

/// Scripted demonstration of pushing the object along `desired`.
///
/// Solves IK along [`push_waypoints`] seeded by the previous solution, then
/// adds smooth Gaussian joint noise of standard deviation `noise` (faded in
/// at the start so every demonstration begins at the start pose).
pub fn scripted_push_demo<R: Rng + ?Sized>(
    arm: &ArmModel,
    sim: &SimConfig,
    desired: &TaskDescriptor,
    start: &WorldState,
    approach_offset: f64,
    noise: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    if desired.num_steps() != sim.num_steps {
        return Err(Error::DimensionMismatch {
            context: "desired object path steps",
            expected: sim.num_steps,
            actual: desired.num_steps(),
        });
    }
    if !(approach_offset > 0.0) || !(noise >= 0.0) {
        return Err(Error::InvalidArgument("approach_offset must be > 0 and noise >= 0".into()));
    }
    let waypoints = push_waypoints(arm, desired, start, approach_offset);
    let mut values = DMatrix::zeros(sim.num_steps, 3);
    let mut q = start.joint_angles;
    for (t, target) in waypoints.iter().enumerate() {
        q = ik_solve(arm, *target, q, DEMO_IK_TOL, DEMO_IK_ITERS)?.q;
        for j in 0..3 {
            values[(t, j)] = q[j];
        }
    }
    values += smooth_noise(sim.num_steps, noise, rng);
    Trajectory::new(values, sim.dt)
}
