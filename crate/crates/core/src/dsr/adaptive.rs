use crate::autodiff::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Per-dimension policy differences below this magnitude are raised to it.
pub const DIFF_FLOOR: f64 = 1e-8;

/// `ρ = mean_{batch, dims} |c / (new − old)|`
pub fn rho(new_means: &Tensor, old_means: &Tensor, c: f64) -> Result<f64> {
    if new_means.shape() != old_means.shape() {
        return Err(Error::shape(
            "adaptive_delta",
            new_means.shape(),
            old_means.shape(),
        ));
    }
    if new_means.is_empty() {
        return Err(Error::InvalidArgument(
            "adaptive_delta on an empty batch".into(),
        ));
    }
    let sum: f64 = new_means
        .data()
        .iter()
        .zip(old_means.data())
        .map(|(n, o)| (c / (n - o).abs().max(DIFF_FLOOR)).abs())
        .sum();
    Ok(sum / new_means.len() as f64)
}

/// `min(ρ, clip(ρ, 1 − ε, 1 + ε))`, which reduces to `min(ρ, 1 + ε)`.
pub fn delta_from_rho(rho: f64, epsilon: f64) -> f64 {
    rho.min(rho.clamp(1.0 - epsilon, 1.0 + epsilon))
}

/// Weight on the forward-dynamics KL, driven by how far the policy mean moved
/// during the last actor update.
#[derive(Clone, Debug)]
pub struct AdaptiveFactor {
    pub c: f64,
    pub epsilon: f64,
    snapshot: Vec<(ParamId, Tensor)>,
    last_delta: Option<f64>,
}

impl AdaptiveFactor {
    pub fn new(c: f64, epsilon: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "c must be positive, got {c}"
            )));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        Ok(Self {
            c,
            epsilon,
            snapshot: Vec::new(),
            last_delta: None,
        })
    }

    pub fn last_delta(&self) -> Option<f64> {
        self.last_delta
    }

    pub fn has_snapshot(&self) -> bool {
        !self.snapshot.is_empty()
    }

    /// Records the current values of the policy parameters as the old policy.
    pub fn refresh_snapshot(&mut self, store: &ParamStore, ids: &[ParamId]) {
        self.snapshot = ids
            .iter()
            .map(|&id| (id, store.value(id).clone()))
            .collect();
    }

    /// Evaluates `means` under the live and the snapshot parameters and
    /// updates the stored δ. The live values are restored before returning.
    pub fn update<F>(&mut self, store: &mut ParamStore, means: F) -> Result<f64>
    where
        F: Fn(&ParamStore) -> Result<Tensor>,
    {
        if self.snapshot.is_empty() {
            return Err(Error::InvalidArgument(
                "adaptive factor needs an old-policy snapshot".into(),
            ));
        }
        let new = means(store)?;
        self.swap(store)?;
        let old = means(store);
        self.swap(store)?;
        let r = rho(&new, &old?, self.c)?;
        let d = delta_from_rho(r, self.epsilon);
        self.last_delta = Some(d);
        Ok(d)
    }

    fn swap(&mut self, store: &mut ParamStore) -> Result<()> {
        for (id, t) in &mut self.snapshot {
            if store.value(*id).shape() != t.shape() {
                return Err(Error::shape(
                    "adaptive snapshot",
                    store.value(*id).shape(),
                    t.shape(),
                ));
            }
            std::mem::swap(store.value_mut(*id), t);
        }
        Ok(())
    }
}
