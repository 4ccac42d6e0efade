use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::losses::{actor_loss, critic_loss, td_target, temperature_loss, update_targets};
use super::policy::{Actor, CriticPair, Temperature};
use super::AgentConfig;
use crate::autodiff::{Adam, Graph, ParamId, ParamStore, Tensor};
use crate::buffer::TransitionBatch;
use crate::dsr::Encoder;
use crate::error::Result;
use crate::nn::{Activation, Mode};
use crate::rng;

/// Encoder sizing shared by the agent and the auxiliary heads.
#[derive(Clone, Debug)]
pub struct EncoderSpec {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub latent: usize,
    pub output: Activation,
    /// EMA rate of the target encoder.
    pub tau: f64,
}

pub fn standard_normal(rng: &mut impl Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches length")
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CriticStats {
    pub loss: f64,
    pub q_mean: f64,
}

#[derive(Clone, Debug)]
pub struct ActorStats {
    pub loss: f64,
    pub alpha_loss: f64,
    pub alpha: f64,
    pub entropy: f64,
    /// Latents the actor was trained on, for diagnostics that need them.
    pub latents: Tensor,
}

/// Encoder, twin critics, squashed-Gaussian actor and temperature, each with
/// its own optimizer. The encoder is stepped by the critic optimizer only.
#[derive(Clone, Debug)]
pub struct Agent {
    pub encoder: Encoder,
    pub target_encoder: Encoder,
    pub actor: Actor,
    pub critics: CriticPair,
    pub temperature: Temperature,
    pub config: AgentConfig,
    pub encoder_tau: f64,
    critic_opt: Adam,
    actor_opt: Adam,
    alpha_opt: Adam,
}

impl Agent {
    pub fn new(
        store: &mut ParamStore,
        seed: u64,
        enc: &EncoderSpec,
        act_dim: usize,
        action_bound: f64,
        config: AgentConfig,
    ) -> Result<Self> {
        config.validate()?;
        let mut r = rng::stream(seed, "init-encoder");
        let encoder = Encoder::new(
            store,
            &mut r,
            "encoder",
            enc.input,
            &enc.hidden,
            enc.latent,
            enc.output,
        )?;
        let target_encoder = Encoder::new(
            store,
            &mut r,
            "encoder_target",
            enc.input,
            &enc.hidden,
            enc.latent,
            enc.output,
        )?;
        store.copy_values(&target_encoder.pairs_from(&encoder))?;
        let actor = Actor::new(
            store,
            &mut rng::stream(seed, "init-actor"),
            enc.latent,
            act_dim,
            &config.hidden,
            action_bound,
            config.log_std_bounds,
        )?;
        let critics = CriticPair::new(
            store,
            &mut rng::stream(seed, "init-critic"),
            enc.latent,
            act_dim,
            &config.hidden,
        )?;
        let target_entropy = config.target_entropy.unwrap_or(-(act_dim as f64));
        let temperature = Temperature::new(store, config.init_temperature, target_entropy)?;

        let mut critic_params = encoder.params();
        critic_params.extend(critics.params());
        let critic_opt = Adam::with_defaults(store, critic_params, config.critic_lr)?;
        let actor_opt = Adam::with_defaults(store, actor.params(), config.actor_lr)?;
        let alpha_opt = Adam::with_defaults(store, vec![temperature.log_alpha], config.alpha_lr)?;
        Ok(Self {
            encoder,
            target_encoder,
            actor,
            critics,
            temperature,
            encoder_tau: enc.tau,
            config,
            critic_opt,
            actor_opt,
            alpha_opt,
        })
    }

    pub fn alpha(&self, store: &ParamStore) -> f64 {
        self.temperature.alpha(store)
    }

    pub fn act_dim(&self) -> usize {
        self.actor.act_dim()
    }

    /// Every parameter the agent owns, targets included.
    pub fn params(&self) -> Vec<ParamId> {
        let mut p = self.encoder.params();
        p.extend(self.target_encoder.params());
        p.extend(self.actor.params());
        p.extend(self.critics.params());
        p.extend(self.critics.target_params());
        p.push(self.temperature.log_alpha);
        p
    }

    /// Latents for a `[batch, stacked_obs]` array, outside any graph.
    pub fn encode(&self, store: &ParamStore, obs: &Tensor) -> Result<Tensor> {
        self.encoder.eval(store, obs)
    }

    /// Deterministic action for one stacked observation.
    pub fn act_mean(&self, store: &ParamStore, obs: &[f64]) -> Result<Vec<f64>> {
        let z = self.encode(store, &Tensor::matrix(1, obs.len(), obs.to_vec())?)?;
        Ok(self.actor.mean_action(store, &z)?.into_data())
    }

    /// Stochastic action for one stacked observation.
    pub fn act_sample(
        &self,
        store: &ParamStore,
        obs: &[f64],
        rng: &mut impl Rng,
    ) -> Result<Vec<f64>> {
        let z = self.encode(store, &Tensor::matrix(1, obs.len(), obs.to_vec())?)?;
        let eps = standard_normal(rng, &[1, self.act_dim()]);
        Ok(self.actor.sample_action(store, &z, &eps)?.into_data())
    }

    /// One TD step on the critics and the encoder.
    pub fn update_critic(
        &mut self,
        store: &mut ParamStore,
        batch: &TransitionBatch,
        rng: &mut impl Rng,
    ) -> Result<CriticStats> {
        let b = batch.len();
        let next_z = self.target_encoder.eval(store, &batch.next_obs)?;
        let eps = standard_normal(rng, &[b, self.act_dim()]);
        let y = td_target(
            store,
            &self.actor,
            &self.critics,
            &next_z,
            &batch.rewards,
            &batch.terminals,
            self.alpha(store),
            self.config.gamma,
            &eps,
        )?;
        let mut g = Graph::new();
        let obs = g.constant(batch.obs.clone());
        let z = self.encoder.forward(&mut g, store, obs, Mode::Train)?;
        let loss = critic_loss(&mut g, store, &self.critics, z, &batch.actions, &y)?;
        let value = g.value(loss).item()?;
        g.backward(loss)?;
        self.critic_opt.zero_grad(store);
        g.write_param_grads(store);
        self.critic_opt.step(store);
        let q_mean = y.data().iter().sum::<f64>() / b as f64;
        Ok(CriticStats {
            loss: value,
            q_mean,
        })
    }

    /// One step on the actor (encoder detached) and on the temperature.
    pub fn update_actor(
        &mut self,
        store: &mut ParamStore,
        batch: &TransitionBatch,
        rng: &mut impl Rng,
    ) -> Result<ActorStats> {
        let b = batch.len();
        let latents = self.encode(store, &batch.obs)?;
        let eps = standard_normal(rng, &[b, self.act_dim()]);
        let alpha = self.alpha(store);
        let mut g = Graph::new();
        let z = g.constant(latents.clone());
        let critics = &self.critics;
        let (loss, log_pi) = actor_loss(
            &mut g,
            store,
            &self.actor,
            |g, s, z, a| critics.min_q(g, s, z, a),
            z,
            alpha,
            &eps,
        )?;
        let value = g.value(loss).item()?;
        g.backward(loss)?;
        self.actor_opt.zero_grad(store);
        g.write_param_grads(store);
        self.actor_opt.step(store);

        let mut ga = Graph::new();
        let tl = temperature_loss(&mut ga, store, &self.temperature, &log_pi)?;
        let alpha_loss = ga.value(tl).item()?;
        ga.backward(tl)?;
        self.alpha_opt.zero_grad(store);
        ga.write_param_grads(store);
        self.alpha_opt.step(store);

        let entropy = -log_pi.data().iter().sum::<f64>() / b as f64;
        Ok(ActorStats {
            loss: value,
            alpha_loss,
            alpha: self.alpha(store),
            entropy,
            latents,
        })
    }

    /// EMA updates of the target critics and the target encoder.
    pub fn update_targets(&self, store: &mut ParamStore) -> Result<()> {
        update_targets(store, &self.critics.target_pairs(), self.config.tau)?;
        update_targets(
            store,
            &self.target_encoder.pairs_from(&self.encoder),
            self.encoder_tau,
        )
    }
}
