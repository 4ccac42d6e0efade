use rand::Rng;
use rand_distr::Uniform;

use super::distractor::{random_orthogonal, DistractorProcess};
use super::{EnvSpec, Observation, RewardKind};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct TrueState {
    pub pos: Vec<f64>,
    pub vel: Vec<f64>,
}

impl TrueState {
    /// `[pos, vel]` as one vector.
    pub fn features(&self) -> Vec<f64> {
        self.pos.iter().chain(&self.vel).copied().collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
    /// The submitted action fell outside the bounds and was clamped.
    pub action_clamped: bool,
}

/// Point mass with friction whose observation is
/// `mixer · [pos, vel, distractor]` for a fixed orthogonal `mixer`.
#[derive(Clone, Debug)]
pub struct DistractingPointMass {
    spec: EnvSpec,
    mixer: Vec<f64>,
    state: TrueState,
    distractor: Option<DistractorProcess>,
    t: usize,
    done: bool,
}

impl DistractingPointMass {
    pub fn new(spec: EnvSpec) -> Result<Self> {
        spec.validate()?;
        let mut mixer_rng = rng::stream(spec.mixer_seed, "observation-mixer");
        let mixer = random_orthogonal(spec.obs_dim(), &mut mixer_rng);
        let state = TrueState {
            pos: vec![0.0; spec.pos_dim],
            vel: vec![0.0; spec.pos_dim],
        };
        Ok(Self {
            spec,
            mixer,
            state,
            distractor: None,
            t: 0,
            done: false,
        })
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    /// Row-major orthogonal mixing matrix, `obs_dim × obs_dim`.
    pub fn mixer(&self) -> &[f64] {
        &self.mixer
    }

    pub fn elapsed(&self) -> usize {
        self.t
    }

    pub fn reset(&mut self, scene_seed: u64, episode_seed: u64) -> Result<Observation> {
        if !self.spec.is_known_scene(scene_seed) {
            return Err(Error::Env(format!(
                "scene {scene_seed} is in neither the train nor the eval list"
            )));
        }
        let mut r = rng::stream(episode_seed, "initial-state");
        let pb = self.spec.pos_bound;
        let pos_dist = Uniform::new_inclusive(-pb, pb).expect("pos bound");
        let pos = (0..self.spec.pos_dim).map(|_| r.sample(pos_dist)).collect();
        let vel = if self.spec.init_vel > 0.0 {
            let v = self.spec.init_vel;
            let vel_dist = Uniform::new_inclusive(-v, v).expect("vel bound");
            (0..self.spec.pos_dim).map(|_| r.sample(vel_dist)).collect()
        } else {
            vec![0.0; self.spec.pos_dim]
        };
        self.state = TrueState { pos, vel };
        self.distractor = Some(DistractorProcess::new(
            self.spec.distractor_dim,
            self.spec.distractor_noise,
            self.spec.distractor_radius,
            scene_seed,
            episode_seed,
        ));
        self.t = 0;
        self.done = false;
        Ok(self.observe())
    }

    /// Places the mass at an explicit state; the episode clock is unchanged.
    pub fn set_true_state(&mut self, state: TrueState) -> Result<()> {
        if state.pos.len() != self.spec.pos_dim || state.vel.len() != self.spec.pos_dim {
            return Err(Error::Env(format!(
                "state dims ({}, {}) do not match pos_dim {}",
                state.pos.len(),
                state.vel.len(),
                self.spec.pos_dim
            )));
        }
        self.state = state;
        Ok(())
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        if self.distractor.is_none() {
            return Err(Error::Env("step before reset".into()));
        }
        if self.done {
            return Err(Error::Env("step after episode end".into()));
        }
        if action.len() != self.spec.act_dim() {
            return Err(Error::Env(format!(
                "action has {} dims, expected {}",
                action.len(),
                self.spec.act_dim()
            )));
        }
        if let Some(a) = action.iter().find(|a| !a.is_finite()) {
            return Err(Error::Env(format!("non-finite action component {a}")));
        }
        let bound = self.spec.action_bound;
        let clamped: Vec<f64> = action.iter().map(|a| a.clamp(-bound, bound)).collect();
        let action_clamped = clamped.as_slice() != action;

        let s = &self.spec;
        let st = &mut self.state;
        for ((p, v), a) in st.pos.iter_mut().zip(st.vel.iter_mut()).zip(&clamped) {
            let next_p = *p + *v * s.dt;
            let next_v = (1.0 - s.friction) * *v + a * s.dt;
            *p = next_p.clamp(-s.pos_bound, s.pos_bound);
            *v = next_v.clamp(-s.vel_bound, s.vel_bound);
        }
        let reward = self.reward();
        if let Some(d) = self.distractor.as_mut() {
            d.advance();
        }
        self.t += 1;
        self.done = self.t >= self.spec.episode_length;
        Ok(StepOutcome {
            obs: self.observe(),
            reward,
            done: self.done,
            action_clamped,
        })
    }

    fn reward(&self) -> f64 {
        let dist = self
            .state
            .pos
            .iter()
            .zip(&self.spec.goal)
            .map(|(p, g)| (p - g) * (p - g))
            .sum::<f64>()
            .sqrt();
        match self.spec.reward {
            RewardKind::Dense => -dist,
            RewardKind::Sparse => {
                if dist < self.spec.goal_radius {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Pre-mixing vector `[pos, vel, distractor]`.
    pub fn latent_vector(&self) -> Vec<f64> {
        let mut v = self.state.features();
        if let Some(d) = &self.distractor {
            v.extend(&d.state);
        } else {
            v.extend(std::iter::repeat_n(0.0, self.spec.distractor_dim));
        }
        v
    }

    fn observe(&self) -> Observation {
        let x = self.latent_vector();
        let n = x.len();
        (0..n)
            .map(|r| {
                self.mixer[r * n..(r + 1) * n]
                    .iter()
                    .zip(&x)
                    .map(|(m, v)| m * v)
                    .sum()
            })
            .collect()
    }

    pub fn true_state(&self) -> TrueState {
        self.state.clone()
    }

    pub fn distractor_state(&self) -> Option<&[f64]> {
        self.distractor.as_ref().map(|d| d.state.as_slice())
    }

    pub fn is_done(&self) -> bool {
        self.done
    }
}

/// Inverts the orthogonal mixer: recovers `[pos, vel, distractor]` from one
/// observation.
pub fn demix(mixer: &[f64], obs: &[f64]) -> Vec<f64> {
    let n = obs.len();
    (0..n)
        .map(|c| (0..n).map(|r| mixer[r * n + c] * obs[r]).sum())
        .collect()
}
