use super::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Adam with bias-corrected moments. Moment state is owned by the optimizer,
/// so the same parameter can be driven by several optimizers independently.
#[derive(Clone, Debug)]
pub struct Adam {
    params: Vec<ParamId>,
    lr: f64,
    betas: (f64, f64),
    eps: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(
        store: &ParamStore,
        params: Vec<ParamId>,
        lr: f64,
        betas: (f64, f64),
        eps: f64,
    ) -> Result<Self> {
        if !(lr > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {lr}"
            )));
        }
        let m = params
            .iter()
            .map(|&id| Tensor::zeros(store.value(id).shape()))
            .collect::<Vec<_>>();
        let v = m.clone();
        Ok(Self {
            params,
            lr,
            betas,
            eps,
            step: 0,
            m,
            v,
        })
    }

    pub fn with_defaults(store: &ParamStore, params: Vec<ParamId>, lr: f64) -> Result<Self> {
        Self::new(store, params, lr, (0.9, 0.999), 1e-8)
    }

    pub fn params(&self) -> &[ParamId] {
        &self.params
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn zero_grad(&self, store: &mut ParamStore) {
        store.zero_grad(&self.params);
    }

    /// Applies one update from the gradients currently held in `store`.
    pub fn step(&mut self, store: &mut ParamStore) {
        self.step += 1;
        let (b1, b2) = self.betas;
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        for (i, &id) in self.params.iter().enumerate() {
            let grad = store.grad(id).data().to_vec();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let value = store.value_mut(id).data_mut();
            for j in 0..grad.len() {
                let g = grad[j];
                m[j] = b1 * m[j] + (1.0 - b1) * g;
                v[j] = b2 * v[j] + (1.0 - b2) * g * g;
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                value[j] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Graph;

    fn scalar_store(x: f64) -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.add("x", Tensor::scalar(x)).unwrap();
        (s, id)
    }

    fn grad_of(
        store: &mut ParamStore,
        id: ParamId,
        f: impl Fn(&mut Graph, crate::autodiff::Var) -> crate::autodiff::Var,
    ) {
        store.zero_grad(&[id]);
        let mut g = Graph::new();
        let x = g.param(store, id);
        let loss = f(&mut g, x);
        g.backward(loss).unwrap();
        g.write_param_grads(store);
    }

    #[test]
    fn rejects_non_positive_lr() {
        let (s, id) = scalar_store(1.0);
        assert!(Adam::with_defaults(&s, vec![id], 0.0).is_err());
        assert!(Adam::with_defaults(&s, vec![id], -1e-3).is_err());
    }

    #[test]
    fn one_step_descends() {
        let (mut s, id) = scalar_store(1.0);
        let mut opt = Adam::with_defaults(&s, vec![id], 0.1).unwrap();
        grad_of(&mut s, id, |g, x| g.square(x).unwrap());
        opt.step(&mut s);
        let x = s.value(id).item().unwrap();
        assert!(x < 1.0 && x > 0.0, "{x}");
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let (mut s, id) = scalar_store(0.7);
        let mut opt = Adam::with_defaults(&s, vec![id], 0.1).unwrap();
        for _ in 0..5 {
            s.zero_grad(&[id]);
            opt.step(&mut s);
        }
        assert_eq!(s.value(id).item().unwrap(), 0.7);
    }

    /// Scalar Adam written out by hand, used to cross-check the optimizer.
    fn reference_adam(x0: f64, lr: f64, steps: usize, grad: impl Fn(f64) -> f64) -> f64 {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let (mut x, mut m, mut v) = (x0, 0.0, 0.0);
        for t in 1..=steps {
            let g = grad(x);
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t as i32));
            let vh = v / (1.0 - b2.powi(t as i32));
            x -= lr * mh / (vh.sqrt() + eps);
        }
        x
    }

    #[test]
    fn converges_on_shifted_quadratic() {
        let (mut s, id) = scalar_store(0.0);
        let mut opt = Adam::with_defaults(&s, vec![id], 0.05).unwrap();
        for _ in 0..200 {
            grad_of(&mut s, id, |g, x| {
                let d = g.add_scalar(x, -2.0).unwrap();
                g.square(d).unwrap()
            });
            opt.step(&mut s);
        }
        let x = s.value(id).item().unwrap();
        let reference = reference_adam(0.0, 0.05, 200, |x| 2.0 * (x - 2.0));
        assert!((x - reference).abs() < 1e-12, "{x} vs {reference}");
        assert!((x - 2.0).abs() < 1e-2, "{x}");
    }
}
