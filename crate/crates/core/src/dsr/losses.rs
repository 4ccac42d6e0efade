use super::encoder::{encode_sequence, Encoder, Which};
use super::gaussian::{kl_diag_gauss, GaussianDiag};
use super::heads::{overshoot_rollout, DsrHeads, LatentDynamics};
use crate::autodiff::{Graph, ParamStore, Tensor, Var};
use crate::buffer::SequenceBatch;
use crate::dtft::{dtft_batch, OmegaGrid};
use crate::error::{Error, Result};
use crate::nn::{Mlp, Mode};

/// Mean over the batch of `‖amp − amp*‖₂ + ‖pha − pha*‖₂`, where `pred` packs
/// `[amplitude | phase]` along its last axis.
pub fn dtft_distance(g: &mut Graph, pred: Var, amp: &Tensor, pha: &Tensor) -> Result<Var> {
    let ps = g.shape(pred).to_vec();
    let &[b, w] = amp.shape() else {
        return Err(Error::InvalidArgument(format!(
            "DTFT targets must be [batch, width], got {:?}",
            amp.shape()
        )));
    };
    if pha.shape() != amp.shape() || ps != [b, 2 * w] {
        return Err(Error::shape("dtft_distance", &ps, &[b, 2 * w]));
    }
    let pa = g.slice(pred, 1, 0, w)?;
    let pp = g.slice(pred, 1, w, w)?;
    let ta = g.constant(amp.clone());
    let tp = g.constant(pha.clone());
    let da = g.sub(pa, ta)?;
    let dp = g.sub(pp, tp)?;
    let na = g.row_norm(da)?;
    let np = g.row_norm(dp)?;
    let per = g.add(na, np)?;
    g.mean(per)
}

fn flatten_seq(g: &mut Graph, x: Var) -> Result<Var> {
    let s = g.shape(x).to_vec();
    let &[b, t, d] = s.as_slice() else {
        return Err(Error::InvalidArgument(format!(
            "expected [batch, T, dim], got {s:?}"
        )));
    };
    g.reshape(x, &[b, t * d])
}

fn check_seq(g: &Graph, op: &'static str, z: Var, actions: &Tensor) -> Result<()> {
    let zs = g.shape(z);
    let a = actions.shape();
    if zs.len() != 3 || a.len() != 3 || zs[..2] != a[..2] {
        return Err(Error::shape(op, zs, a));
    }
    Ok(())
}

/// Predicts the DTFT features of the action window from adjacent latent
/// windows `z_{0..T}` and `z_{1..T+1}`.
pub fn inverse_loss(
    g: &mut Graph,
    store: &ParamStore,
    head: &Mlp,
    z_seq: Var,
    next_z_seq: Var,
    actions: &Tensor,
    grid: &OmegaGrid,
) -> Result<Var> {
    if g.shape(z_seq) != g.shape(next_z_seq) {
        return Err(Error::shape(
            "inverse_loss",
            g.shape(z_seq),
            g.shape(next_z_seq),
        ));
    }
    check_seq(g, "inverse_loss", z_seq, actions)?;
    let (amp, pha) = dtft_batch(actions, grid)?;
    let a = flatten_seq(g, z_seq)?;
    let b = flatten_seq(g, next_z_seq)?;
    let x = g.concat(&[a, b], 1)?;
    let pred = head.forward(g, store, x, Mode::Train)?;
    dtft_distance(g, pred, &amp, &pha)
}

/// Predicts the DTFT features of the reward window from `z_{0..T}` and the
/// actions taken.
pub fn reward_loss(
    g: &mut Graph,
    store: &ParamStore,
    head: &Mlp,
    z_seq: Var,
    actions: &Tensor,
    rewards: &Tensor,
    grid: &OmegaGrid,
) -> Result<Var> {
    check_seq(g, "reward_loss", z_seq, actions)?;
    if rewards.shape() != &actions.shape()[..2] {
        return Err(Error::shape(
            "reward_loss",
            rewards.shape(),
            &actions.shape()[..2],
        ));
    }
    let (amp, pha) = dtft_batch(rewards, grid)?;
    let z = flatten_seq(g, z_seq)?;
    let a = g.constant(actions.clone());
    let a = flatten_seq(g, a)?;
    let x = g.concat(&[z, a], 1)?;
    let pred = head.forward(g, store, x, Mode::Train)?;
    dtft_distance(g, pred, &amp, &pha)
}

#[derive(Clone, Copy, Debug)]
pub struct ForwardLoss {
    pub kl: Var,
    pub recon: Var,
    /// `delta · kl + recon`
    pub total: Var,
}

/// Latent-overshooting loss: KL from the `T`-step rollout to the unit
/// Gaussian around the target latent, plus the unit-variance Gaussian
/// negative log-likelihood (constants dropped) of `target_obs` decoded from
/// one sample of the rollout.
#[allow(clippy::too_many_arguments)]
pub fn forward_loss(
    g: &mut Graph,
    store: &ParamStore,
    dynamics: &dyn LatentDynamics,
    decoder: &Mlp,
    z0: Var,
    actions: &Tensor,
    target_z: Var,
    target_obs: &Tensor,
    delta: f64,
    eps: &Tensor,
) -> Result<ForwardLoss> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "delta must be finite and non-negative, got {delta}"
        )));
    }
    let acts = g.constant(actions.clone());
    let p = overshoot_rollout(g, store, dynamics, z0, acts)?;
    let q = GaussianDiag::unit(g, target_z);
    let kl = kl_diag_gauss(g, &p, &q)?;
    let z = p.sample(g, eps)?;
    let recon_mean = decoder.forward(g, store, z, Mode::Train)?;
    let obs = g.constant(target_obs.clone());
    let diff = g.sub(recon_mean, obs)?;
    let sq = g.square(diff)?;
    let per = g.sum_axis(sq, 1)?;
    let nll = g.mean(per)?;
    let recon = g.mul_scalar(nll, 0.5)?;
    let weighted = g.mul_scalar(kl, delta)?;
    let total = g.add(weighted, recon)?;
    Ok(ForwardLoss { kl, recon, total })
}

/// Which auxiliary terms are built.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AuxToggles {
    pub inverse: bool,
    pub reward: bool,
    pub forward: bool,
}

impl AuxToggles {
    pub const ALL: Self = Self {
        inverse: true,
        reward: true,
        forward: true,
    };

    pub fn any(&self) -> bool {
        self.inverse || self.reward || self.forward
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AuxLosses {
    pub inverse: Option<Var>,
    pub reward: Option<Var>,
    pub forward: Option<ForwardLoss>,
    /// `d_rm + d_im + f_dm` over the enabled terms.
    pub total: Var,
}

/// Shared inputs of [`total_aux_loss`].
pub struct AuxInputs<'a> {
    pub encoder: &'a Encoder,
    pub target_encoder: &'a Encoder,
    pub heads: &'a DsrHeads,
    pub grid: &'a OmegaGrid,
    pub delta: f64,
    /// `[batch, latent]` standard normal noise for the overshooting sample.
    pub eps: &'a Tensor,
}

/// Builds every enabled auxiliary loss for a window batch of `T+1` steps.
pub fn total_aux_loss(
    g: &mut Graph,
    store: &ParamStore,
    inputs: &AuxInputs<'_>,
    seq: &SequenceBatch,
) -> Result<AuxLosses> {
    let h = inputs.heads;
    let b = seq.batch();
    let steps = seq.steps();
    if steps < 2 {
        return Err(Error::InvalidArgument(
            "window needs at least 2 steps".into(),
        ));
    }
    let t = steps - 1;
    let latent = inputs.encoder.latent_dim();
    let obs_dim = seq.obs.shape()[2];

    let z = encode_sequence(g, store, inputs.encoder, &seq.obs, Which::Live)?;
    let z_seq = g.slice(z, 1, 0, t)?;
    let actions = window(&seq.actions, 0, t)?;

    let mut terms = Vec::new();
    let inverse = match &h.inverse {
        Some(head) => {
            let next = g.slice(z, 1, 1, t)?;
            let l = inverse_loss(g, store, head, z_seq, next, &actions, inputs.grid)?;
            terms.push(l);
            Some(l)
        }
        None => None,
    };
    let reward = match &h.reward {
        Some(head) => {
            let rewards = window(&seq.rewards, 0, t)?;
            let l = reward_loss(g, store, head, z_seq, &actions, &rewards, inputs.grid)?;
            terms.push(l);
            Some(l)
        }
        None => None,
    };
    let forward = match (&h.transition, &h.decoder) {
        (Some(tm), Some(dec)) => {
            let z0 = g.slice(z, 1, 0, 1)?;
            let z0 = g.reshape(z0, &[b, latent])?;
            let last_obs = window(&seq.obs, t, 1)?.reshape(&[b, 1, obs_dim])?;
            let zt = encode_sequence(g, store, inputs.target_encoder, &last_obs, Which::Target)?;
            let zt = g.reshape(zt, &[b, latent])?;
            let target_obs = last_obs.reshape(&[b, obs_dim])?;
            let f = forward_loss(
                g,
                store,
                tm,
                dec,
                z0,
                &actions,
                zt,
                &target_obs,
                inputs.delta,
                inputs.eps,
            )?;
            terms.push(f.total);
            Some(f)
        }
        (None, None) => None,
        _ => {
            return Err(Error::InvalidArgument(
                "forward loss needs both a transition model and a decoder".into(),
            ))
        }
    };
    let mut total = *terms
        .first()
        .ok_or_else(|| Error::InvalidArgument("every auxiliary loss is disabled".into()))?;
    for &l in &terms[1..] {
        total = g.add(total, l)?;
    }
    Ok(AuxLosses {
        inverse,
        reward,
        forward,
        total,
    })
}

/// Steps `start..start+len` along axis 1 of a `[batch, steps, ...]` tensor.
pub fn window(x: &Tensor, start: usize, len: usize) -> Result<Tensor> {
    let shape = x.shape();
    if shape.len() < 2 || start + len > shape[1] {
        return Err(Error::InvalidArgument(format!(
            "window {start}..{} out of range for {shape:?}",
            start + len
        )));
    }
    let inner: usize = shape[2..].iter().product();
    let (b, s) = (shape[0], shape[1]);
    let mut out = Vec::with_capacity(b * len * inner);
    for i in 0..b {
        let base = (i * s + start) * inner;
        out.extend_from_slice(&x.data()[base..base + len * inner]);
    }
    let mut new_shape = shape.to_vec();
    new_shape[1] = len;
    Tensor::new(new_shape, out)
}
