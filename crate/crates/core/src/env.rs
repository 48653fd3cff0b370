//! Surrogate 2D kinematic Multi-Object Push / Rearrange environment.
//!
//! The workspace is the unit square. A disk end-effector moves by a bounded
//! per-axis displacement each step; pucks are disks displaced quasi-statically
//! out of overlap along contact normals. `step` is a pure function of
//! `(state, action, config)`, so rollouts parallelize trivially and every
//! contact case is exactly testable.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 2D point/vector in workspace units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dist(self, other: Vec2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }

    pub fn add(self, other: Vec2) -> Vec2 {
        Vec2::new(self.x + other.x, self.y + other.y)
    }

    pub fn sub(self, other: Vec2) -> Vec2 {
        Vec2::new(self.x - other.x, self.y - other.y)
    }

    pub fn scale(self, f: f64) -> Vec2 {
        Vec2::new(self.x * f, self.y * f)
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    fn clamp_unit_square(self) -> Vec2 {
        Vec2::new(self.x.clamp(0.0, 1.0), self.y.clamp(0.0, 1.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Objects start on fixed positions in front of the arm.
    Push,
    /// Objects start at random clearance-sampled positions.
    Rearrange,
}

impl std::str::FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "push" => Ok(Task::Push),
            "rearrange" => Ok(Task::Rearrange),
            other => Err(Error::Config(format!("unknown task '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EnvConfig {
    pub task: Task,
    pub num_objects: usize,
    pub effector_radius: f64,
    pub puck_radius: f64,
    /// Max displacement per axis per action, in workspace units.
    pub max_step: f64,
    pub episode_len: usize,
}

impl EnvConfig {
    pub fn new(task: Task, num_objects: usize) -> Self {
        EnvConfig {
            task,
            num_objects,
            effector_radius: 0.03,
            puck_radius: 0.04,
            max_step: 0.05,
            episode_len: match task {
                Task::Push => 15,
                Task::Rearrange => 20,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_objects == 0 || self.num_objects > 6 {
            return Err(Error::Config(format!(
                "num_objects must be in 1..=6, got {}",
                self.num_objects
            )));
        }
        if self.effector_radius >= 0.25 || self.puck_radius >= 0.25 {
            return Err(Error::Config("radii must be < 0.25".into()));
        }
        if self.episode_len == 0 {
            return Err(Error::Config("episode_len must be >= 1".into()));
        }
        Ok(())
    }

    /// Contact distance between effector and puck centers.
    pub fn arm_contact(&self) -> f64 {
        self.effector_radius + self.puck_radius
    }

    /// Minimum center distance between two pucks.
    pub fn puck_clearance(&self) -> f64 {
        2.0 * self.puck_radius
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub arm: Vec2,
    /// Index is the persistent object identity.
    pub objects: Vec<Vec2>,
    pub t: usize,
}

/// Action components are clamped to `[-1, 1]` and scaled by `max_step`
/// inside `step`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub dx: f64,
    pub dy: f64,
}

impl Action {
    pub fn new(dx: f64, dy: f64) -> Self {
        Action {
            dx: dx.clamp(-1.0, 1.0),
            dy: dy.clamp(-1.0, 1.0),
        }
    }

    pub fn zero() -> Self {
        Action { dx: 0.0, dy: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalState {
    pub objects: Vec<Vec2>,
    pub arm: Option<Vec2>,
}

const ARM_START: Vec2 = Vec2 { x: 0.5, y: 0.15 };
const PUSH_LINE_Y: f64 = 0.55;
const REJECTION_LIMIT: usize = 1000;

/// Fixed evenly spaced line layout for the push task. Two objects sit at
/// x = 0.35 and 0.65; wider counts keep at least one puck diameter of
/// clearance.
fn push_layout(n: usize) -> Vec<Vec2> {
    if n == 1 {
        return vec![Vec2::new(0.5, PUSH_LINE_Y)];
    }
    let half_span = (0.15f64).max(0.05 * (n - 1) as f64);
    let (lo, hi) = (0.5 - half_span, 0.5 + half_span);
    (0..n)
        .map(|i| {
            let frac = i as f64 / (n - 1) as f64;
            Vec2::new(lo * (1.0 - frac) + hi * frac, PUSH_LINE_Y)
        })
        .collect()
}

/// Uniform positions inside `[margin, 1-margin]^2` with pairwise clearance.
fn sample_clearance_points(
    n: usize,
    clearance: f64,
    margin: f64,
    rng: &mut impl Rng,
) -> Result<Vec<Vec2>> {
    let mut points: Vec<Vec2> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut placed = false;
        for _ in 0..REJECTION_LIMIT {
            let p = Vec2::new(
                rng.gen_range(margin..=1.0 - margin),
                rng.gen_range(margin..=1.0 - margin),
            );
            if points.iter().all(|q| q.dist(p) >= clearance) {
                points.push(p);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Env(format!(
                "could not place {n} objects with clearance {clearance} after {REJECTION_LIMIT} samples"
            )));
        }
    }
    Ok(points)
}

pub fn reset(config: &EnvConfig, rng: &mut impl Rng) -> Result<EnvState> {
    config.validate()?;
    let objects = match config.task {
        Task::Push => push_layout(config.num_objects),
        Task::Rearrange => sample_clearance_points(
            config.num_objects,
            config.puck_clearance(),
            config.puck_radius,
            rng,
        )?,
    };
    Ok(EnvState {
        arm: ARM_START,
        objects,
        t: 0,
    })
}

/// Push `p` out of the disk of radius `r` around `center` along the contact
/// normal, by the minimal displacement. Degenerate coincident centers move
/// along +x.
fn resolve_disk(p: Vec2, center: Vec2, r: f64) -> Option<Vec2> {
    let d = p.dist(center);
    if d >= r {
        return None;
    }
    let normal = if d > 1e-12 {
        p.sub(center).scale(1.0 / d)
    } else {
        Vec2::new(1.0, 0.0)
    };
    Some(center.add(normal.scale(r)))
}

/// Closest point to `p` on the segment `a..b`.
fn closest_on_segment(p: Vec2, a: Vec2, b: Vec2) -> Vec2 {
    let ab = b.sub(a);
    let len2 = ab.x * ab.x + ab.y * ab.y;
    if len2 <= 1e-24 {
        return a;
    }
    let t = ((p.sub(a).x * ab.x + p.sub(a).y * ab.y) / len2).clamp(0.0, 1.0);
    a.add(ab.scale(t))
}

pub fn step(state: &EnvState, action: Action, config: &EnvConfig) -> Result<EnvState> {
    if state.t >= config.episode_len {
        return Err(Error::Env(format!(
            "step at t={} after episode end ({})",
            state.t, config.episode_len
        )));
    }
    let arm_from = state.arm;
    let arm_to = arm_from
        .add(Vec2::new(
            action.dx.clamp(-1.0, 1.0) * config.max_step,
            action.dy.clamp(-1.0, 1.0) * config.max_step,
        ))
        .clamp_unit_square();

    let contact = config.arm_contact();
    let clearance = config.puck_clearance();
    let mut objects = state.objects.clone();

    // Iterate overlap resolution to a fixpoint: the arm's swept disk pushes
    // pucks out along contact normals, displaced pucks push each other, and
    // pucks stay inside the workspace.
    for _ in 0..10 {
        let mut moved = false;
        for p in objects.iter_mut() {
            let anchor = closest_on_segment(*p, arm_from, arm_to);
            if let Some(resolved) = resolve_disk(*p, anchor, contact) {
                *p = resolved;
                moved = true;
            }
        }
        for i in 0..objects.len() {
            for j in (i + 1)..objects.len() {
                let d = objects[i].dist(objects[j]);
                if d < clearance {
                    let normal = if d > 1e-12 {
                        objects[j].sub(objects[i]).scale(1.0 / d)
                    } else {
                        Vec2::new(1.0, 0.0)
                    };
                    let push = (clearance - d) / 2.0;
                    objects[i] = objects[i].sub(normal.scale(push));
                    objects[j] = objects[j].add(normal.scale(push));
                    moved = true;
                }
            }
        }
        for p in objects.iter_mut() {
            let clamped = p.clamp_unit_square();
            if clamped != *p {
                *p = clamped;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }

    Ok(EnvState {
        arm: arm_to,
        objects,
        t: state.t + 1,
    })
}

/// Random evaluation goal: uniform object targets inside an inner margin of
/// one puck radius with pairwise clearance, plus an arm target kept clear of
/// the object targets.
pub fn sample_eval_goal(config: &EnvConfig, rng: &mut impl Rng) -> Result<GoalState> {
    config.validate()?;
    let objects = sample_clearance_points(
        config.num_objects,
        config.puck_clearance(),
        config.puck_radius,
        rng,
    )?;
    let mut arm = None;
    for _ in 0..REJECTION_LIMIT {
        let p = Vec2::new(
            rng.gen_range(config.effector_radius..=1.0 - config.effector_radius),
            rng.gen_range(config.effector_radius..=1.0 - config.effector_radius),
        );
        if objects.iter().all(|q| q.dist(p) >= config.arm_contact()) {
            arm = Some(p);
            break;
        }
    }
    let arm = arm.ok_or_else(|| Error::Env("could not place arm target".into()))?;
    Ok(GoalState {
        objects,
        arm: Some(arm),
    })
}

/// Mean Euclidean object-to-target distance; the arm is excluded.
pub fn goal_distance(state: &EnvState, goal: &GoalState) -> Result<f64> {
    if state.objects.len() != goal.objects.len() {
        return Err(Error::Env(format!(
            "goal_distance: {} objects vs {} targets",
            state.objects.len(),
            goal.objects.len()
        )));
    }
    let total: f64 = state
        .objects
        .iter()
        .zip(&goal.objects)
        .map(|(p, q)| p.dist(*q))
        .sum();
    Ok(total / state.objects.len() as f64)
}
