use std::collections::HashMap;

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
struct Entry {
    name: String,
    value: Tensor,
    grad: Tensor,
}

/// Named trainable arrays together with their gradient accumulators.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    entries: Vec<Entry>,
    by_name: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::InvalidArgument(format!(
                "duplicate parameter name `{name}`"
            )));
        }
        let id = ParamId(self.entries.len());
        let grad = Tensor::zeros(value.shape());
        self.by_name.insert(name.clone(), id);
        self.entries.push(Entry { name, value, grad });
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].grad
    }

    pub fn set_value(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        let entry = &mut self.entries[id.0];
        if entry.value.shape() != value.shape() {
            return Err(Error::shape(
                "set_value",
                entry.value.shape(),
                value.shape(),
            ));
        }
        entry.value = value;
        Ok(())
    }

    pub(crate) fn accumulate_grad(&mut self, id: ParamId, grad: &Tensor) {
        self.entries[id.0].grad.add_assign(grad);
    }

    pub fn zero_grad(&mut self, ids: &[ParamId]) {
        for id in ids {
            self.entries[id.0].grad.fill(0.0);
        }
    }

    pub fn zero_all_grads(&mut self) {
        for e in &mut self.entries {
            e.grad.fill(0.0);
        }
    }

    /// `target ← (1 − tau)·target + tau·source` for each `(target, source)` pair.
    pub fn soft_update(&mut self, pairs: &[(ParamId, ParamId)], tau: f64) -> Result<()> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "EMA rate must lie in (0, 1], got {tau}"
            )));
        }
        for &(dst, src) in pairs {
            if self.value(dst).shape() != self.value(src).shape() {
                return Err(Error::shape(
                    "soft_update",
                    self.value(dst).shape(),
                    self.value(src).shape(),
                ));
            }
            let src_data = self.entries[src.0].value.data().to_vec();
            let dst_data = self.entries[dst.0].value.data_mut();
            if tau == 1.0 {
                dst_data.copy_from_slice(&src_data);
            } else {
                for (d, s) in dst_data.iter_mut().zip(src_data) {
                    *d = (1.0 - tau) * *d + tau * s;
                }
            }
        }
        Ok(())
    }

    /// Copies values of `src` params into `dst` params (same shapes required).
    pub fn copy_values(&mut self, pairs: &[(ParamId, ParamId)]) -> Result<()> {
        self.soft_update(pairs, 1.0)
    }
}
