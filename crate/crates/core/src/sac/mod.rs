//! Soft actor-critic on encoder latents.

mod agent;
mod losses;
mod policy;

pub use agent::{standard_normal, ActorStats, Agent, CriticStats, EncoderSpec};
pub use losses::{
    actor_loss, critic_loss, td_target, td_target_values, temperature_loss, update_targets,
};
pub use policy::{squashed_sample, Actor, Critic, CriticPair, PolicySample, Temperature};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub alpha_lr: f64,
    pub batch_size: usize,
    /// EMA rate of the target critics.
    pub tau: f64,
    pub init_temperature: f64,
    /// Defaults to `−act_dim`.
    pub target_entropy: Option<f64>,
    pub hidden: Vec<usize>,
    pub log_std_bounds: [f64; 2],
    /// Environment steps between gradient steps.
    pub update_every: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            actor_lr: 5e-4,
            critic_lr: 5e-4,
            alpha_lr: 5e-4,
            batch_size: 256,
            tau: 0.01,
            init_temperature: 0.1,
            target_entropy: None,
            hidden: vec![256, 256],
            log_std_bounds: [-5.0, 2.0],
            update_every: 2,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, msg: String| {
            Err(Error::Config {
                field: format!("agent.{field}"),
                msg,
            })
        };
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail("gamma", format!("must lie in [0, 1], got {}", self.gamma));
        }
        for (name, v) in [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("alpha_lr", self.alpha_lr),
            ("init_temperature", self.init_temperature),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(name, format!("must be positive, got {v}"));
            }
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return fail("tau", format!("must lie in (0, 1], got {}", self.tau));
        }
        if self.batch_size == 0 {
            return fail("batch_size", "must be positive".into());
        }
        if self.update_every == 0 {
            return fail("update_every", "must be positive".into());
        }
        if self.hidden.contains(&0) {
            return fail("hidden", "widths must be positive".into());
        }
        let [lo, hi] = self.log_std_bounds;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return fail("log_std_bounds", format!("need lo < hi, got [{lo}, {hi}]"));
        }
        Ok(())
    }
}
