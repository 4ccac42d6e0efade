//! Point-mass control tasks observed through an orthogonal mixer that
//! entangles the task state with an AR(1) distractor process. Each distractor
//! "scene" is identified by a seed; training and evaluation use disjoint
//! scene lists.

mod distractor;
mod point_mass;
mod stack;

pub use distractor::{random_orthogonal, spectral_radius, DistractorProcess};
pub use point_mass::{demix, DistractingPointMass, StepOutcome, TrueState};
pub use stack::{FrameStack, STACK_FRAMES};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Observation = Vec<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardKind {
    /// `−‖pos − goal‖₂`
    Dense,
    /// `1` inside the goal radius, else `0`.
    Sparse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSpec {
    pub pos_dim: usize,
    pub episode_length: usize,
    pub dt: f64,
    pub friction: f64,
    pub action_bound: f64,
    pub pos_bound: f64,
    pub vel_bound: f64,
    /// Initial velocities are drawn from `U[−init_vel, init_vel]`.
    pub init_vel: f64,
    pub reward: RewardKind,
    pub goal: Vec<f64>,
    pub goal_radius: f64,
    pub distractor_dim: usize,
    pub distractor_noise: f64,
    /// Per-scene pole radii of the distractor dynamics are drawn from this range.
    pub distractor_radius: [f64; 2],
    pub mixer_seed: u64,
    pub train_scenes: Vec<u64>,
    pub eval_scenes: Vec<u64>,
}

impl Default for EnvSpec {
    fn default() -> Self {
        Self {
            pos_dim: 2,
            episode_length: 200,
            dt: 0.05,
            friction: 0.05,
            action_bound: 1.0,
            pos_bound: 1.0,
            vel_bound: 2.0,
            init_vel: 0.1,
            reward: RewardKind::Dense,
            goal: vec![0.5, -0.5],
            goal_radius: 0.2,
            distractor_dim: 16,
            distractor_noise: 0.3,
            distractor_radius: [0.5, 0.9],
            mixer_seed: 0,
            train_scenes: vec![0, 1],
            eval_scenes: (1000..1030).collect(),
        }
    }
}

impl EnvSpec {
    pub fn obs_dim(&self) -> usize {
        2 * self.pos_dim + self.distractor_dim
    }

    pub fn act_dim(&self) -> usize {
        self.pos_dim
    }

    pub fn stacked_obs_dim(&self) -> usize {
        STACK_FRAMES * self.obs_dim()
    }

    pub fn is_known_scene(&self, scene: u64) -> bool {
        self.train_scenes.contains(&scene) || self.eval_scenes.contains(&scene)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, msg: String| {
            Err(Error::Config {
                field: format!("env.{field}"),
                msg,
            })
        };
        if self.pos_dim == 0 {
            return fail("pos_dim", "must be positive".into());
        }
        if self.episode_length == 0 {
            return fail("episode_length", "must be positive".into());
        }
        for (name, v) in [
            ("dt", self.dt),
            ("action_bound", self.action_bound),
            ("pos_bound", self.pos_bound),
            ("vel_bound", self.vel_bound),
            ("goal_radius", self.goal_radius),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(name, format!("must be positive and finite, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.friction) {
            return fail(
                "friction",
                format!("must lie in [0, 1), got {}", self.friction),
            );
        }
        if !(self.init_vel >= 0.0) {
            return fail(
                "init_vel",
                format!("must be non-negative, got {}", self.init_vel),
            );
        }
        if !(self.distractor_noise >= 0.0) {
            return fail(
                "distractor_noise",
                format!("must be non-negative, got {}", self.distractor_noise),
            );
        }
        let [lo, hi] = self.distractor_radius;
        if !(0.0 <= lo && lo <= hi && hi < 1.0) {
            return fail(
                "distractor_radius",
                format!("need 0 <= lo <= hi < 1, got [{lo}, {hi}]"),
            );
        }
        if self.goal.len() != self.pos_dim {
            return fail(
                "goal",
                format!(
                    "has {} coordinates, pos_dim is {}",
                    self.goal.len(),
                    self.pos_dim
                ),
            );
        }
        if self.train_scenes.is_empty() {
            return fail("train_scenes", "must not be empty".into());
        }
        if self.eval_scenes.is_empty() {
            return fail("eval_scenes", "must not be empty".into());
        }
        if let Some(s) = self
            .train_scenes
            .iter()
            .find(|s| self.eval_scenes.contains(s))
        {
            return fail("eval_scenes", format!("scene {s} is also a training scene"));
        }
        Ok(())
    }
}
