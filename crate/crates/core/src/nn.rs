//! Dense layers built on the autodiff graph.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, ParamId, ParamStore, Tensor, Var};
use crate::error::Result;

/// How parameters enter a graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Parameters are differentiable leaves.
    Train,
    /// Parameters are constants; no gradient reaches them.
    Frozen,
}

fn load(g: &mut Graph, store: &ParamStore, id: ParamId, mode: Mode) -> Var {
    match mode {
        Mode::Train => g.param(store, id),
        Mode::Frozen => g.frozen_param(store, id),
    }
}

#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    /// Uniform(±1/√fan_in) weights and biases.
    pub fn new(
        store: &mut ParamStore,
        rng: &mut impl Rng,
        name: &str,
        fan_in: usize,
        fan_out: usize,
    ) -> Result<Self> {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let w: Vec<f64> = (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect();
        let b: Vec<f64> = (0..fan_out).map(|_| dist.sample(rng)).collect();
        let weight = store.add(format!("{name}.w"), Tensor::matrix(fan_in, fan_out, w)?)?;
        let bias = store.add(format!("{name}.b"), Tensor::vector(b))?;
        Ok(Self {
            weight,
            bias,
            fan_in,
            fan_out,
        })
    }

    /// `x · W + b` for `x` of shape `[batch, fan_in]`.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var, mode: Mode) -> Result<Var> {
        let w = load(g, store, self.weight, mode);
        let b = load(g, store, self.bias, mode);
        let xw = g.matmul(x, w)?;
        g.add(xw, b)
    }

    pub fn params(&self) -> [ParamId; 2] {
        [self.weight, self.bias]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
}

/// ReLU multilayer perceptron with a configurable output activation.
#[derive(Clone, Debug)]
pub struct Mlp {
    layers: Vec<Linear>,
    output: Activation,
}

impl Mlp {
    /// `dims` lists layer widths from input to output, e.g. `[60, 64, 50]`.
    pub fn new(
        store: &mut ParamStore,
        rng: &mut impl Rng,
        name: &str,
        dims: &[usize],
        output: Activation,
    ) -> Result<Self> {
        assert!(
            dims.len() >= 2,
            "an MLP needs at least input and output widths"
        );
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, rng, &format!("{name}.l{i}"), w[0], w[1]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layers, output })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var, mode: Mode) -> Result<Var> {
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(g, store, h, mode)?;
            if i < last {
                h = g.relu(h)?;
            }
        }
        match self.output {
            Activation::Identity => Ok(h),
            Activation::Tanh => g.tanh(h),
        }
    }

    /// Forward pass outside of any training graph.
    pub fn eval(&self, store: &ParamStore, x: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let xv = g.constant(x.clone());
        let y = self.forward(&mut g, store, xv, Mode::Frozen)?;
        Ok(g.value(y).clone())
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out
    }
}

/// `(target, source)` pairs for EMA updates between two same-shaped MLPs.
pub fn param_pairs(target: &Mlp, source: &Mlp) -> Vec<(ParamId, ParamId)> {
    target.params().into_iter().zip(source.params()).collect()
}
