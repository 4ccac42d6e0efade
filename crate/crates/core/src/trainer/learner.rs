use crate::autodiff::{Adam, Graph, ParamStore};
use crate::buffer::ReplayBuffer;
use crate::dsr::{total_aux_loss, AdaptiveFactor, AuxInputs, AuxToggles, DsrHeads, HeadShape};
use crate::dtft::OmegaGrid;
use crate::error::Result;
use crate::rng::{self, Rng};
use crate::sac::{standard_normal, Agent, EncoderSpec};

use super::config::RunConfig;
use super::metrics::StepLosses;

/// Labels of the random streams a run draws from.
pub mod streams {
    pub const EXPLORE: &str = "explore";
    pub const POLICY: &str = "policy";
    pub const EPISODES: &str = "episodes";
    pub const REPLAY: &str = "replay";
    pub const SAC_UPDATE: &str = "sac-update";
    pub const AUX_SAMPLE: &str = "aux-sample";
    pub const AUX_NOISE: &str = "aux-noise";
    pub const EVAL: &str = "eval";
    pub const PROBE: &str = "probe";
}

/// Random streams consumed by gradient steps.
#[derive(Clone, Debug)]
pub struct UpdateRngs {
    pub replay: Rng,
    pub sac: Rng,
    pub aux_sample: Rng,
    pub aux_noise: Rng,
}

impl UpdateRngs {
    pub fn new(seed: u64) -> Self {
        Self {
            replay: rng::stream(seed, streams::REPLAY),
            sac: rng::stream(seed, streams::SAC_UPDATE),
            aux_sample: rng::stream(seed, streams::AUX_SAMPLE),
            aux_noise: rng::stream(seed, streams::AUX_NOISE),
        }
    }
}

/// All trainable state of a run: agent, auxiliary heads and their optimizer.
#[derive(Clone, Debug)]
pub struct Learner {
    pub store: ParamStore,
    pub agent: Agent,
    pub heads: DsrHeads,
    pub toggles: AuxToggles,
    pub adaptive: AdaptiveFactor,
    grid: OmegaGrid,
    seq_len: usize,
    aux_opt: Option<Adam>,
}

/// Encoder sizing implied by a run configuration.
pub fn encoder_spec(cfg: &RunConfig) -> EncoderSpec {
    EncoderSpec {
        input: cfg.env.stacked_obs_dim(),
        hidden: cfg.dsr.encoder_hidden.clone(),
        latent: cfg.dsr.latent_dim,
        output: cfg.dsr.encoder_output,
        tau: cfg.dsr.tau_encoder,
    }
}

impl Learner {
    pub fn new(cfg: &RunConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut store = ParamStore::new();
        let spec = &cfg.env;
        let agent = Agent::new(
            &mut store,
            seed,
            &encoder_spec(cfg),
            spec.act_dim(),
            spec.action_bound,
            cfg.agent.clone(),
        )?;
        let toggles = cfg.ablation.toggles();
        let shape = HeadShape {
            latent: cfg.dsr.latent_dim,
            act: spec.act_dim(),
            obs: spec.stacked_obs_dim(),
            seq_len: cfg.dsr.seq_len,
            grid_points: cfg.dsr.grid_points,
            hidden: &cfg.dsr.head_hidden,
        };
        let mut heads = DsrHeads {
            reward: None,
            inverse: None,
            transition: None,
            decoder: None,
        };
        if toggles.inverse {
            let r = &mut rng::stream(seed, "init-inverse-head");
            heads.inverse = Some(DsrHeads::inverse_head(&mut store, r, shape)?);
        }
        if toggles.reward {
            let r = &mut rng::stream(seed, "init-reward-head");
            heads.reward = Some(DsrHeads::reward_head(&mut store, r, shape)?);
        }
        if toggles.forward {
            let r = &mut rng::stream(seed, "init-transition");
            heads.transition = Some(DsrHeads::transition_model(&mut store, r, shape)?);
            let r = &mut rng::stream(seed, "init-decoder");
            heads.decoder = Some(DsrHeads::decoder(&mut store, r, shape)?);
        }
        let aux_opt = if toggles.any() {
            let mut ids = agent.encoder.params();
            ids.extend(heads.params());
            Some(Adam::with_defaults(&store, ids, cfg.dsr.lr)?)
        } else {
            None
        };
        Ok(Self {
            store,
            agent,
            heads,
            toggles,
            adaptive: AdaptiveFactor::new(cfg.dsr.c, cfg.dsr.epsilon)?,
            grid: OmegaGrid::new(cfg.dsr.grid_points)?,
            seq_len: cfg.dsr.seq_len,
            aux_opt,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.agent.config.batch_size
    }

    /// Critic, actor and temperature updates, then (when any auxiliary term
    /// is enabled) the adaptive factor and one auxiliary step, then the
    /// target EMAs.
    pub fn gradient_step(
        &mut self,
        buffer: &ReplayBuffer,
        rngs: &mut UpdateRngs,
    ) -> Result<StepLosses> {
        let b = self.batch_size();
        let batch = buffer.sample_transitions(b, &mut rngs.replay)?;
        let critic = self
            .agent
            .update_critic(&mut self.store, &batch, &mut rngs.sac)?;
        let aux = self.toggles.any();
        if aux {
            self.adaptive
                .refresh_snapshot(&self.store, &self.agent.actor.params());
        }
        let actor = self
            .agent
            .update_actor(&mut self.store, &batch, &mut rngs.sac)?;
        let mut out = StepLosses {
            critic: critic.loss,
            actor: actor.loss,
            alpha: actor.alpha,
            ..StepLosses::default()
        };
        if let Some(opt) = self.aux_opt.as_mut() {
            debug_assert!(aux);
            let policy = &self.agent.actor;
            let latents = &actor.latents;
            let delta = self
                .adaptive
                .update(&mut self.store, |s| policy.mean_action(s, latents))?;
            out.delta = Some(delta);

            let seq = buffer.sample_sequences(b, self.seq_len, &mut rngs.aux_sample)?;
            let eps = standard_normal(&mut rngs.aux_noise, &[b, self.agent.encoder.latent_dim()]);
            let inputs = AuxInputs {
                encoder: &self.agent.encoder,
                target_encoder: &self.agent.target_encoder,
                heads: &self.heads,
                grid: &self.grid,
                delta,
                eps: &eps,
            };
            let mut g = Graph::new();
            let losses = total_aux_loss(&mut g, &self.store, &inputs, &seq)?;
            let value = |v| g.value(v).item();
            out.d_im = losses.inverse.map(value).transpose()?;
            out.d_rm = losses.reward.map(value).transpose()?;
            out.f_dm = losses.forward.map(|f| value(f.total)).transpose()?;
            g.backward(losses.total)?;
            opt.zero_grad(&mut self.store);
            g.write_param_grads(&mut self.store);
            opt.step(&mut self.store);
        }
        self.agent.update_targets(&mut self.store)?;
        Ok(out)
    }
}
