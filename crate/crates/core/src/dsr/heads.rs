use rand::Rng;

use super::gaussian::{GaussianDiag, LOGVAR_MAX, LOGVAR_MIN};
use crate::autodiff::{Graph, ParamId, ParamStore, Var};
use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp, Mode};

fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut d = vec![input];
    d.extend_from_slice(hidden);
    d.push(output);
    d
}

/// One step of a latent transition distribution `p(z' | z, a)`.
pub trait LatentDynamics {
    fn latent_dim(&self) -> usize;

    /// `z: [batch, latent]`, `a: [batch, act]`.
    fn step(&self, g: &mut Graph, store: &ParamStore, z: Var, a: Var) -> Result<GaussianDiag>;
}

/// Residual MLP dynamics: `mean = z + Δ(z, a)`, log-variance clamped.
#[derive(Clone, Debug)]
pub struct TransitionModel {
    mlp: Mlp,
    latent: usize,
}

impl TransitionModel {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut impl Rng,
        name: &str,
        latent: usize,
        act: usize,
        hidden: &[usize],
    ) -> Result<Self> {
        let mlp = Mlp::new(
            store,
            rng,
            name,
            &widths(latent + act, hidden, 2 * latent),
            Activation::Identity,
        )?;
        Ok(Self { mlp, latent })
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.mlp.params()
    }
}

impl LatentDynamics for TransitionModel {
    fn latent_dim(&self) -> usize {
        self.latent
    }

    fn step(&self, g: &mut Graph, store: &ParamStore, z: Var, a: Var) -> Result<GaussianDiag> {
        let x = g.concat(&[z, a], 1)?;
        let out = self.mlp.forward(g, store, x, Mode::Train)?;
        let delta = g.slice(out, 1, 0, self.latent)?;
        let raw_lv = g.slice(out, 1, self.latent, self.latent)?;
        let mean = g.add(z, delta)?;
        let logvar = g.clamp(raw_lv, LOGVAR_MIN, LOGVAR_MAX)?;
        Ok(GaussianDiag { mean, logvar })
    }
}

/// Rolls `dynamics` over `actions: [batch, T, act]` from `z0`, feeding each
/// step's mean into the next, and returns the distribution of the last step.
pub fn overshoot_rollout(
    g: &mut Graph,
    store: &ParamStore,
    dynamics: &dyn LatentDynamics,
    z0: Var,
    actions: Var,
) -> Result<GaussianDiag> {
    let shape = g.shape(actions).to_vec();
    let &[b, t, a] = shape.as_slice() else {
        return Err(Error::InvalidArgument(format!(
            "overshoot_rollout expects actions [batch, T, act], got {shape:?}"
        )));
    };
    if t == 0 {
        return Err(Error::InvalidArgument(
            "overshoot_rollout needs T >= 1".into(),
        ));
    }
    let zs = g.shape(z0);
    if zs != [b, dynamics.latent_dim()] {
        return Err(Error::shape(
            "overshoot_rollout",
            zs,
            &[b, dynamics.latent_dim()],
        ));
    }
    let mut z = z0;
    let mut last = None;
    for i in 0..t {
        let ai = g.slice(actions, 1, i, 1)?;
        let ai = g.reshape(ai, &[b, a])?;
        let d = dynamics.step(g, store, z, ai)?;
        z = d.mean;
        last = Some(d);
    }
    Ok(last.expect("T >= 1"))
}

/// Prediction heads for the three auxiliary losses. A head is absent when
/// its loss is disabled.
#[derive(Clone, Debug)]
pub struct DsrHeads {
    /// `[z_{0..T}, a_{0..T}] → reward DTFT features (2k)`
    pub reward: Option<Mlp>,
    /// `[z_{0..T}, z_{1..T+1}] → action DTFT features (2·act·k)`
    pub inverse: Option<Mlp>,
    pub transition: Option<TransitionModel>,
    /// `z → stacked observation`
    pub decoder: Option<Mlp>,
}

#[derive(Clone, Copy, Debug)]
pub struct HeadShape<'a> {
    pub latent: usize,
    pub act: usize,
    pub obs: usize,
    pub seq_len: usize,
    pub grid_points: usize,
    pub hidden: &'a [usize],
}

impl DsrHeads {
    pub fn reward_head(
        store: &mut ParamStore,
        rng: &mut impl Rng,
        s: HeadShape<'_>,
    ) -> Result<Mlp> {
        let input = s.seq_len * (s.latent + s.act);
        Mlp::new(
            store,
            rng,
            "dsr.reward",
            &widths(input, s.hidden, 2 * s.grid_points),
            Activation::Identity,
        )
    }

    pub fn inverse_head(
        store: &mut ParamStore,
        rng: &mut impl Rng,
        s: HeadShape<'_>,
    ) -> Result<Mlp> {
        let input = 2 * s.seq_len * s.latent;
        Mlp::new(
            store,
            rng,
            "dsr.inverse",
            &widths(input, s.hidden, 2 * s.act * s.grid_points),
            Activation::Identity,
        )
    }

    pub fn transition_model(
        store: &mut ParamStore,
        rng: &mut impl Rng,
        s: HeadShape<'_>,
    ) -> Result<TransitionModel> {
        TransitionModel::new(store, rng, "dsr.transition", s.latent, s.act, s.hidden)
    }

    pub fn decoder(store: &mut ParamStore, rng: &mut impl Rng, s: HeadShape<'_>) -> Result<Mlp> {
        Mlp::new(
            store,
            rng,
            "dsr.decoder",
            &widths(s.latent, s.hidden, s.obs),
            Activation::Identity,
        )
    }

    pub fn params(&self) -> Vec<ParamId> {
        let mut p = Vec::new();
        for m in [&self.reward, &self.inverse, &self.decoder]
            .into_iter()
            .flatten()
        {
            p.extend(m.params());
        }
        if let Some(t) = &self.transition {
            p.extend(t.params());
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use crate::rng;

    /// `z' = A z + B a` with fixed log-variance.
    struct Linear1 {
        a: f64,
        b: f64,
        logvar: f64,
    }

    impl LatentDynamics for Linear1 {
        fn latent_dim(&self) -> usize {
            1
        }

        fn step(&self, g: &mut Graph, _: &ParamStore, z: Var, a: Var) -> Result<GaussianDiag> {
            let az = g.mul_scalar(z, self.a)?;
            let ba = g.mul_scalar(a, self.b)?;
            let mean = g.add(az, ba)?;
            let logvar = g.constant(Tensor::full(g.shape(mean), self.logvar));
            Ok(GaussianDiag { mean, logvar })
        }
    }

    #[test]
    fn identity_dynamics_keep_the_mean() {
        let store = ParamStore::new();
        let id = Linear1 {
            a: 1.0,
            b: 0.0,
            logvar: -6.0,
        };
        let mut g = Graph::new();
        let z0 = g.constant(Tensor::matrix(2, 1, vec![0.4, -0.9]).unwrap());
        let acts = g.constant(Tensor::new(vec![2, 5, 1], vec![1.0; 10]).unwrap());
        let d = overshoot_rollout(&mut g, &store, &id, z0, acts).unwrap();
        for (a, b) in g.value(d.mean).data().iter().zip([0.4, -0.9]) {
            assert!((a - b).abs() < 1e-2);
        }
    }

    #[test]
    fn linear_rollout_matches_closed_form() {
        let store = ParamStore::new();
        let dynamics = Linear1 {
            a: 0.8,
            b: 0.5,
            logvar: -1.0,
        };
        let us = [0.3, -1.0, 0.7, 0.2];
        let mut g = Graph::new();
        let z0 = g.constant(Tensor::matrix(1, 1, vec![1.5]).unwrap());
        let acts = g.constant(Tensor::new(vec![1, 4, 1], us.to_vec()).unwrap());
        let d = overshoot_rollout(&mut g, &store, &dynamics, z0, acts).unwrap();
        // A^T z0 + Σ A^{T-1-i} B u_i
        let want = 0.8f64.powi(4) * 1.5
            + us.iter()
                .enumerate()
                .map(|(i, u)| 0.8f64.powi(3 - i as i32) * 0.5 * u)
                .sum::<f64>();
        assert!((g.value(d.mean).data()[0] - want).abs() < 1e-12);
        assert_eq!(g.value(d.logvar).data()[0], -1.0);
    }

    #[test]
    fn one_step_rollout_is_one_call() {
        let mut store = ParamStore::new();
        let mut r = rng::stream(1, "t");
        let tm = TransitionModel::new(&mut store, &mut r, "tm", 3, 2, &[8]).unwrap();
        let z = Tensor::matrix(2, 3, vec![0.1, 0.2, 0.3, -0.1, 0.0, 0.5]).unwrap();
        let a = Tensor::matrix(2, 2, vec![0.5, -0.5, 1.0, 0.0]).unwrap();
        let mut g = Graph::new();
        let zv = g.constant(z);
        let av = g.constant(a.clone());
        let direct = tm.step(&mut g, &store, zv, av).unwrap();
        let a3 = g.constant(a.reshape(&[2, 1, 2]).unwrap());
        let rolled = overshoot_rollout(&mut g, &store, &tm, zv, a3).unwrap();
        assert_eq!(g.value(direct.mean), g.value(rolled.mean));
        assert_eq!(g.value(direct.logvar), g.value(rolled.logvar));
    }

    #[test]
    fn transition_logvar_is_clamped() {
        let mut store = ParamStore::new();
        let mut r = rng::stream(1, "t");
        let tm = TransitionModel::new(&mut store, &mut r, "tm", 2, 1, &[4]).unwrap();
        let mut g = Graph::new();
        let z = g.constant(Tensor::full(&[3, 2], 1e4));
        let a = g.constant(Tensor::full(&[3, 1], -1e4));
        let d = tm.step(&mut g, &store, z, a).unwrap();
        assert!(g
            .value(d.logvar)
            .data()
            .iter()
            .all(|&v| (LOGVAR_MIN..=LOGVAR_MAX).contains(&v)));
    }

    #[test]
    fn zero_horizon_rejected() {
        let store = ParamStore::new();
        let dynamics = Linear1 {
            a: 1.0,
            b: 1.0,
            logvar: 0.0,
        };
        let mut g = Graph::new();
        let z0 = g.constant(Tensor::zeros(&[1, 1]));
        let acts = g.constant(Tensor::zeros(&[1, 0, 1]));
        assert!(overshoot_rollout(&mut g, &store, &dynamics, z0, acts).is_err());
    }
}
