use super::policy::{Actor, CriticPair, Temperature};
use crate::autodiff::{Graph, ParamId, ParamStore, Tensor, Var};
use crate::error::{Error, Result};
use crate::nn::Mode;

/// `y = r + γ·(1 − terminal)·(min_q_next − α·log_pi_next)`, elementwise.
pub fn td_target_values(
    rewards: &[f64],
    terminals: &[f64],
    min_q_next: &[f64],
    log_pi_next: &[f64],
    alpha: f64,
    gamma: f64,
) -> Result<Vec<f64>> {
    let n = rewards.len();
    if terminals.len() != n || min_q_next.len() != n || log_pi_next.len() != n {
        return Err(Error::InvalidArgument(format!(
            "td_target inputs differ in length: {n}, {}, {}, {}",
            terminals.len(),
            min_q_next.len(),
            log_pi_next.len()
        )));
    }
    Ok((0..n)
        .map(|i| {
            rewards[i] + gamma * (1.0 - terminals[i]) * (min_q_next[i] - alpha * log_pi_next[i])
        })
        .collect())
}

/// Bootstrapped soft target from the target critics at a fresh policy draw
/// on `next_z`. Returned as a constant `[batch, 1]` tensor.
#[allow(clippy::too_many_arguments)]
pub fn td_target(
    store: &ParamStore,
    actor: &Actor,
    critics: &CriticPair,
    next_z: &Tensor,
    rewards: &Tensor,
    terminals: &Tensor,
    alpha: f64,
    gamma: f64,
    eps: &Tensor,
) -> Result<Tensor> {
    let mut g = Graph::new();
    let z = g.constant(next_z.clone());
    let s = actor.sample(&mut g, store, z, eps, Mode::Frozen)?;
    let q = critics.min_target_q(&mut g, store, z, s.action)?;
    let y = td_target_values(
        rewards.data(),
        terminals.data(),
        g.value(q).data(),
        g.value(s.log_prob).data(),
        alpha,
        gamma,
    )?;
    Tensor::matrix(y.len(), 1, y)
}

/// `mean ½[(y − Q₁)² + (y − Q₂)²]` with gradients into the live critics and
/// whatever produced `z`.
pub fn critic_loss(
    g: &mut Graph,
    store: &ParamStore,
    critics: &CriticPair,
    z: Var,
    actions: &Tensor,
    y: &Tensor,
) -> Result<Var> {
    let a = g.constant(actions.clone());
    let (q1, q2) = critics.both(g, store, z, a, Mode::Train)?;
    if g.shape(q1) != y.shape() {
        return Err(Error::shape("critic_loss", g.shape(q1), y.shape()));
    }
    let yv = g.constant(y.clone());
    let d1 = g.sub(q1, yv)?;
    let d2 = g.sub(q2, yv)?;
    let s1 = g.square(d1)?;
    let s2 = g.square(d2)?;
    let s = g.add(s1, s2)?;
    let m = g.mean(s)?;
    g.mul_scalar(m, 0.5)
}

/// `mean(α·log π(a′|z) − Q(z, a′))` for a reparameterized `a′`. `q` must
/// load critic parameters as constants. Also returns the log-probabilities.
pub fn actor_loss<Q>(
    g: &mut Graph,
    store: &ParamStore,
    actor: &Actor,
    q: Q,
    z: Var,
    alpha: f64,
    eps: &Tensor,
) -> Result<(Var, Tensor)>
where
    Q: Fn(&mut Graph, &ParamStore, Var, Var) -> Result<Var>,
{
    let s = actor.sample(g, store, z, eps, Mode::Train)?;
    let qv = q(g, store, z, s.action)?;
    let ent = g.mul_scalar(s.log_prob, alpha)?;
    let d = g.sub(ent, qv)?;
    let loss = g.mean(d)?;
    Ok((loss, g.value(s.log_prob).clone()))
}

/// `mean(−α·(log π + target_entropy))` differentiated in `log α`.
pub fn temperature_loss(
    g: &mut Graph,
    store: &ParamStore,
    temp: &Temperature,
    log_pi: &Tensor,
) -> Result<Var> {
    let la = g.param(store, temp.log_alpha);
    let alpha = g.exp(la)?;
    let mean_lp = log_pi.data().iter().sum::<f64>() / log_pi.len().max(1) as f64;
    let k = -(mean_lp + temp.target_entropy);
    let l = g.mul_scalar(alpha, k)?;
    g.sum(l)
}

/// `target ← (1 − τ)·target + τ·live` for each `(target, live)` pair.
pub fn update_targets(
    store: &mut ParamStore,
    pairs: &[(ParamId, ParamId)],
    tau: f64,
) -> Result<()> {
    store.soft_update(pairs, tau)
}
