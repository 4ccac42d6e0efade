use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dsr::{AuxToggles, DsrConfig};
use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::sac::AgentConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Schedule {
    pub total_steps: usize,
    /// Uniform random actions for this many initial environment steps.
    pub exploration_steps: usize,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub log_interval: usize,
    pub buffer_capacity: usize,
    pub seeds: Vec<u64>,
    /// Alternate `collect_episodes` whole episodes with `gradient_steps`
    /// updates instead of updating every `agent.update_every` steps.
    pub two_phase: bool,
    pub collect_episodes: usize,
    pub gradient_steps: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            total_steps: 100_000,
            exploration_steps: 1000,
            eval_interval: 10_000,
            eval_episodes: 10,
            log_interval: 1000,
            buffer_capacity: crate::buffer::DEFAULT_CAPACITY,
            seeds: vec![0, 1, 2],
            two_phase: false,
            collect_episodes: 1,
            gradient_steps: 100,
        }
    }
}

/// Auxiliary terms switched off. `all` implies the other three.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ablation {
    pub inverse: bool,
    pub reward: bool,
    pub forward: bool,
    pub all: bool,
}

impl Ablation {
    pub fn toggles(&self) -> AuxToggles {
        AuxToggles {
            inverse: !(self.all || self.inverse),
            reward: !(self.all || self.reward),
            forward: !(self.all || self.forward),
        }
    }

    /// Applies a command-line name: `im`, `rm`, `dm` or `all`.
    pub fn disable(&mut self, name: &str) -> Result<()> {
        match name {
            "im" => self.inverse = true,
            "rm" => self.reward = true,
            "dm" => self.forward = true,
            "all" => self.all = true,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown ablation `{other}`, expected im, rm, dm or all"
                )))
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Logging {
    /// Adds elapsed seconds to each record, which breaks byte-identical logs.
    pub wall_clock: bool,
    /// Samples for the linear probe at evaluation records; 0 disables it.
    pub probe_samples: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub env: EnvSpec,
    pub dsr: DsrConfig,
    pub agent: AgentConfig,
    pub schedule: Schedule,
    pub ablation: Ablation,
    pub logging: Logging,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.dsr.validate()?;
        self.agent.validate()?;
        let s = &self.schedule;
        let fail = |field: &str, msg: String| {
            Err(Error::Config {
                field: format!("schedule.{field}"),
                msg,
            })
        };
        for (name, v) in [
            ("eval_interval", s.eval_interval),
            ("eval_episodes", s.eval_episodes),
            ("log_interval", s.log_interval),
            ("collect_episodes", s.collect_episodes),
            ("gradient_steps", s.gradient_steps),
        ] {
            if v == 0 {
                return fail(name, "must be positive".into());
            }
        }
        if s.buffer_capacity < self.agent.batch_size {
            return fail(
                "buffer_capacity",
                format!("smaller than agent.batch_size {}", self.agent.batch_size),
            );
        }
        if s.seeds.is_empty() {
            return fail("seeds", "must not be empty".into());
        }
        if self.ablation.toggles().any() && self.dsr.seq_len + 1 > self.env.episode_length {
            return Err(Error::Config {
                field: "dsr.seq_len".into(),
                msg: format!(
                    "windows of {} steps do not fit in episodes of {}",
                    self.dsr.seq_len + 1,
                    self.env.episode_length
                ),
            });
        }
        if self.logging.probe_samples > 0 && self.logging.probe_samples <= self.dsr.latent_dim + 1 {
            return Err(Error::Config {
                field: "logging.probe_samples".into(),
                msg: format!("must exceed latent_dim + 1 = {}", self.dsr.latent_dim + 1),
            });
        }
        Ok(())
    }
}
