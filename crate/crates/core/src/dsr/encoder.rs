use rand::Rng;

use crate::autodiff::{Graph, ParamId, ParamStore, Tensor, Var};
use crate::error::{Error, Result};
use crate::nn::{param_pairs, Activation, Mlp, Mode};

/// Map from a stacked observation to a latent state.
#[derive(Clone, Debug)]
pub struct Encoder {
    mlp: Mlp,
}

impl Encoder {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut impl Rng,
        name: &str,
        input: usize,
        hidden: &[usize],
        latent: usize,
        output: Activation,
    ) -> Result<Self> {
        let mut dims = vec![input];
        dims.extend_from_slice(hidden);
        dims.push(latent);
        Ok(Self {
            mlp: Mlp::new(store, rng, name, &dims, output)?,
        })
    }

    pub fn from_mlp(mlp: Mlp) -> Self {
        Self { mlp }
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn input_dim(&self) -> usize {
        self.mlp.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.mlp.output_dim()
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.mlp.params()
    }

    /// `[n, input] → [n, latent]`
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var, mode: Mode) -> Result<Var> {
        self.mlp.forward(g, store, x, mode)
    }

    pub fn eval(&self, store: &ParamStore, x: &Tensor) -> Result<Tensor> {
        self.mlp.eval(store, x)
    }

    /// `(target, live)` parameter pairs for EMA updates of a same-shaped copy.
    pub fn pairs_from(&self, live: &Encoder) -> Vec<(ParamId, ParamId)> {
        param_pairs(&self.mlp, &live.mlp)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    /// Gradients reach the encoder parameters.
    Live,
    /// EMA copy loaded as constants.
    Target,
}

/// Encodes every step of `[batch, steps, input]` observations into
/// `[batch, steps, latent]`.
pub fn encode_sequence(
    g: &mut Graph,
    store: &ParamStore,
    encoder: &Encoder,
    obs: &Tensor,
    which: Which,
) -> Result<Var> {
    let &[b, s, d] = obs.shape() else {
        return Err(Error::InvalidArgument(format!(
            "encode_sequence expects [batch, steps, dim], got {:?}",
            obs.shape()
        )));
    };
    if d != encoder.input_dim() {
        return Err(Error::shape(
            "encode_sequence",
            obs.shape(),
            &[encoder.input_dim()],
        ));
    }
    let flat = g.constant(obs.clone().reshape(&[b * s, d])?);
    let mode = match which {
        Which::Live => Mode::Train,
        Which::Target => Mode::Frozen,
    };
    let z = encoder.forward(g, store, flat, mode)?;
    g.reshape(z, &[b, s, encoder.latent_dim()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn pair() -> (ParamStore, Encoder, Encoder) {
        let mut store = ParamStore::new();
        let mut r = rng::stream(0, "t");
        let live = Encoder::new(&mut store, &mut r, "enc", 6, &[8], 5, Activation::Tanh).unwrap();
        let target =
            Encoder::new(&mut store, &mut r, "enc_tgt", 6, &[8], 5, Activation::Tanh).unwrap();
        store.copy_values(&target.pairs_from(&live)).unwrap();
        (store, live, target)
    }

    fn obs(b: usize, s: usize) -> Tensor {
        let data = (0..b * s * 6).map(|i| (i as f64 * 0.37).sin()).collect();
        Tensor::new(vec![b, s, 6], data).unwrap()
    }

    #[test]
    fn live_and_target_agree_when_equal() {
        let (store, live, target) = pair();
        let o = obs(3, 4);
        let mut g = Graph::new();
        let a = encode_sequence(&mut g, &store, &live, &o, Which::Live).unwrap();
        let b = encode_sequence(&mut g, &store, &target, &o, Which::Target).unwrap();
        assert_eq!(g.value(a), g.value(b));
        assert_eq!(g.shape(a), &[3, 4, 5]);
    }

    #[test]
    fn target_gets_no_gradient() {
        let (mut store, live, target) = pair();
        let o = obs(2, 4);
        let mut g = Graph::new();
        let a = encode_sequence(&mut g, &store, &live, &o, Which::Live).unwrap();
        let b = encode_sequence(&mut g, &store, &target, &o, Which::Target).unwrap();
        let d = g.sub(a, b).unwrap();
        let d = g.add_scalar(d, 0.1).unwrap();
        let sq = g.square(d).unwrap();
        let loss = g.sum(sq).unwrap();
        g.backward(loss).unwrap();
        g.write_param_grads(&mut store);
        for id in target.params() {
            assert!(store.grad(id).data().iter().all(|&x| x == 0.0));
        }
        assert!(live
            .params()
            .iter()
            .any(|&id| store.grad(id).data().iter().any(|&x| x != 0.0)));
    }

    #[test]
    fn full_size_batch_shape() {
        let mut store = ParamStore::new();
        let mut r = rng::stream(0, "t");
        let enc = Encoder::new(&mut store, &mut r, "enc", 60, &[32], 50, Activation::Tanh).unwrap();
        let o = Tensor::zeros(&[256, 4, 60]);
        let mut g = Graph::new();
        let z = encode_sequence(&mut g, &store, &enc, &o, Which::Live).unwrap();
        assert_eq!(g.shape(z), &[256, 4, 50]);
    }
}
