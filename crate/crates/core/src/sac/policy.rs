use std::f64::consts::{LN_2, PI};

use rand::Rng;

use crate::autodiff::{Graph, ParamId, ParamStore, Tensor, Var};
use crate::error::{Error, Result};
use crate::nn::{param_pairs, Activation, Mlp, Mode};

fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut d = vec![input];
    d.extend_from_slice(hidden);
    d.push(output);
    d
}

/// Tanh-squashed diagonal Gaussian policy over latents.
#[derive(Clone, Debug)]
pub struct Actor {
    mlp: Mlp,
    act_dim: usize,
    bound: f64,
    log_std_min: f64,
    log_std_max: f64,
}

/// Reparameterized policy draw.
#[derive(Clone, Copy, Debug)]
pub struct PolicySample {
    /// `[batch, act]`, within `±bound`.
    pub action: Var,
    /// `[batch, 1]`
    pub log_prob: Var,
}

impl Actor {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut impl Rng,
        latent: usize,
        act_dim: usize,
        hidden: &[usize],
        bound: f64,
        log_std_bounds: [f64; 2],
    ) -> Result<Self> {
        if !(bound > 0.0) || log_std_bounds[0] >= log_std_bounds[1] {
            return Err(Error::InvalidArgument(format!(
                "bad actor bounds: action {bound}, log-std {log_std_bounds:?}"
            )));
        }
        let mlp = Mlp::new(
            store,
            rng,
            "actor",
            &widths(latent, hidden, 2 * act_dim),
            Activation::Identity,
        )?;
        Ok(Self {
            mlp,
            act_dim,
            bound,
            log_std_min: log_std_bounds[0],
            log_std_max: log_std_bounds[1],
        })
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.mlp.params()
    }

    pub fn act_dim(&self) -> usize {
        self.act_dim
    }

    /// Pre-squash mean and log standard deviation, each `[batch, act]`.
    pub fn distribution(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        z: Var,
        mode: Mode,
    ) -> Result<(Var, Var)> {
        let out = self.mlp.forward(g, store, z, mode)?;
        let mu = g.slice(out, 1, 0, self.act_dim)?;
        let raw = g.slice(out, 1, self.act_dim, self.act_dim)?;
        // tanh rescaled onto [log_std_min, log_std_max]
        let t = g.tanh(raw)?;
        let half = 0.5 * (self.log_std_max - self.log_std_min);
        let scaled = g.mul_scalar(t, half)?;
        let log_std = g.add_scalar(scaled, self.log_std_min + half)?;
        Ok((mu, log_std))
    }

    /// `a = bound · tanh(μ + σ·eps)` with its log-density.
    pub fn sample(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        z: Var,
        eps: &Tensor,
        mode: Mode,
    ) -> Result<PolicySample> {
        let (mu, log_std) = self.distribution(g, store, z, mode)?;
        squashed_sample(g, mu, log_std, eps, self.bound)
    }

    /// Deterministic action `bound · tanh(μ)` outside any training graph.
    pub fn mean_action(&self, store: &ParamStore, z: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let zv = g.constant(z.clone());
        let (mu, _) = self.distribution(&mut g, store, zv, Mode::Frozen)?;
        Ok(g.value(mu).map(|m| self.bound * m.tanh()))
    }

    /// Stochastic action outside any training graph.
    pub fn sample_action(&self, store: &ParamStore, z: &Tensor, eps: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let zv = g.constant(z.clone());
        let s = self.sample(&mut g, store, zv, eps, Mode::Frozen)?;
        Ok(g.value(s.action).clone())
    }
}

/// Squashed Gaussian draw. `log π(a) = log N(u; μ, σ) − Σ log(bound · (1 − tanh²u))`
/// with `log(1 − tanh²u) = 2(ln 2 − u − softplus(−2u))`.
pub fn squashed_sample(
    g: &mut Graph,
    mu: Var,
    log_std: Var,
    eps: &Tensor,
    bound: f64,
) -> Result<PolicySample> {
    if g.shape(mu) != eps.shape() {
        return Err(Error::shape("policy sample", g.shape(mu), eps.shape()));
    }
    let act = eps.shape()[1];
    let e = g.constant(eps.clone());
    let std = g.exp(log_std)?;
    let noise = g.mul(std, e)?;
    let u = g.add(mu, noise)?;
    let t = g.tanh(u)?;
    let action = g.mul_scalar(t, bound)?;

    let gauss_const = -0.5 * (2.0 * PI).ln() * act as f64;
    let sq = g.constant(eps.map(|x| -0.5 * x * x));
    let per_dim = g.sub(sq, log_std)?;

    let neg2u = g.mul_scalar(u, -2.0)?;
    let sp = g.softplus(neg2u)?;
    let s = g.add(u, sp)?;
    let log_jac = g.mul_scalar(s, -2.0)?;
    let log_jac = g.add_scalar(log_jac, 2.0 * LN_2 + bound.ln())?;
    let per_dim = g.sub(per_dim, log_jac)?;
    let summed = g.sum_axis(per_dim, 1)?;
    let summed = g.add_scalar(summed, gauss_const)?;
    let b = eps.shape()[0];
    let log_prob = g.reshape(summed, &[b, 1])?;
    Ok(PolicySample { action, log_prob })
}

/// State-action value network `(z, a) → Q`.
#[derive(Clone, Debug)]
pub struct Critic {
    mlp: Mlp,
}

impl Critic {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut impl Rng,
        name: &str,
        latent: usize,
        act_dim: usize,
        hidden: &[usize],
    ) -> Result<Self> {
        Ok(Self {
            mlp: Mlp::new(
                store,
                rng,
                name,
                &widths(latent + act_dim, hidden, 1),
                Activation::Identity,
            )?,
        })
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.mlp.params()
    }

    /// `[batch, 1]`
    pub fn q(&self, g: &mut Graph, store: &ParamStore, z: Var, a: Var, mode: Mode) -> Result<Var> {
        let x = g.concat(&[z, a], 1)?;
        self.mlp.forward(g, store, x, mode)
    }
}

/// Twin critics with EMA targets.
#[derive(Clone, Debug)]
pub struct CriticPair {
    pub q1: Critic,
    pub q2: Critic,
    pub target1: Critic,
    pub target2: Critic,
}

impl CriticPair {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut impl Rng,
        latent: usize,
        act_dim: usize,
        hidden: &[usize],
    ) -> Result<Self> {
        let q1 = Critic::new(store, rng, "critic1", latent, act_dim, hidden)?;
        let q2 = Critic::new(store, rng, "critic2", latent, act_dim, hidden)?;
        let target1 = Critic::new(store, rng, "critic1_target", latent, act_dim, hidden)?;
        let target2 = Critic::new(store, rng, "critic2_target", latent, act_dim, hidden)?;
        let pair = Self {
            q1,
            q2,
            target1,
            target2,
        };
        store.copy_values(&pair.target_pairs())?;
        Ok(pair)
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut p = self.q1.params();
        p.extend(self.q2.params());
        p
    }

    pub fn target_params(&self) -> Vec<ParamId> {
        let mut p = self.target1.params();
        p.extend(self.target2.params());
        p
    }

    pub fn target_pairs(&self) -> Vec<(ParamId, ParamId)> {
        let mut p = param_pairs(&self.target1.mlp, &self.q1.mlp);
        p.extend(param_pairs(&self.target2.mlp, &self.q2.mlp));
        p
    }

    /// Both live critics, `[batch, 1]` each.
    pub fn both(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        z: Var,
        a: Var,
        mode: Mode,
    ) -> Result<(Var, Var)> {
        Ok((
            self.q1.q(g, store, z, a, mode)?,
            self.q2.q(g, store, z, a, mode)?,
        ))
    }

    /// Elementwise minimum of the live critics (parameters frozen).
    pub fn min_q(&self, g: &mut Graph, store: &ParamStore, z: Var, a: Var) -> Result<Var> {
        let (a1, a2) = self.both(g, store, z, a, Mode::Frozen)?;
        g.minimum(a1, a2)
    }

    /// Elementwise minimum of the target critics.
    pub fn min_target_q(&self, g: &mut Graph, store: &ParamStore, z: Var, a: Var) -> Result<Var> {
        let t1 = self.target1.q(g, store, z, a, Mode::Frozen)?;
        let t2 = self.target2.q(g, store, z, a, Mode::Frozen)?;
        g.minimum(t1, t2)
    }
}

/// Learned entropy temperature `α = exp(log_alpha)`.
#[derive(Clone, Debug)]
pub struct Temperature {
    pub log_alpha: ParamId,
    pub target_entropy: f64,
}

impl Temperature {
    pub fn new(store: &mut ParamStore, init: f64, target_entropy: f64) -> Result<Self> {
        if !(init > 0.0 && init.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "initial temperature must be positive, got {init}"
            )));
        }
        let log_alpha = store.add("log_alpha", Tensor::vector(vec![init.ln()]))?;
        Ok(Self {
            log_alpha,
            target_entropy,
        })
    }

    pub fn alpha(&self, store: &ParamStore) -> f64 {
        store.value(self.log_alpha).data()[0].exp()
    }
}
