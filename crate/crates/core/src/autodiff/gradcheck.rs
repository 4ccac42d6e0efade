//! Central finite-difference checks of reverse-mode gradients.

use super::{Graph, ParamId, ParamStore, Tensor, Var};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheck {
    /// Largest relative error among entries whose absolute error exceeds
    /// the floor; 0 when every entry is within the floor.
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub checked: usize,
}

impl GradCheck {
    fn new() -> Self {
        Self {
            max_rel_err: 0.0,
            max_abs_err: 0.0,
            checked: 0,
        }
    }

    fn record(&mut self, analytic: f64, numeric: f64, abs_floor: f64) {
        let abs = (analytic - numeric).abs();
        self.max_abs_err = self.max_abs_err.max(abs);
        if abs > abs_floor {
            let rel = abs / analytic.abs().max(numeric.abs());
            self.max_rel_err = self.max_rel_err.max(rel);
        }
        self.checked += 1;
    }

    pub fn passes(&self, rel_tol: f64) -> bool {
        self.max_rel_err <= rel_tol
    }
}

fn scalar(g: &Graph, v: Var) -> Result<f64> {
    g.value(v).item()
}

/// Checks `∂f/∂inputs` where `f` builds a scalar from leaves holding `inputs`.
pub fn check_inputs<F>(inputs: &[Tensor], h: f64, abs_floor: f64, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = values.iter().map(|t| g.constant(t.clone())).collect();
        let y = f(&mut g, &vars)?;
        scalar(&g, y)
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let y = f(&mut g, &vars)?;
    g.backward(y)?;

    let mut report = GradCheck::new();
    let mut probe: Vec<Tensor> = inputs.to_vec();
    for (i, v) in vars.iter().enumerate() {
        let analytic = g.grad(*v).map(|t| t.data().to_vec());
        for j in 0..inputs[i].len() {
            let x = inputs[i].data()[j];
            probe[i].data_mut()[j] = x + h;
            let up = eval(&probe)?;
            probe[i].data_mut()[j] = x - h;
            let down = eval(&probe)?;
            probe[i].data_mut()[j] = x;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic.as_ref().map_or(0.0, |d| d[j]);
            report.record(a, numeric, abs_floor);
        }
    }
    Ok(report)
}

/// Checks `∂f/∂params` for parameters loaded through [`Graph::param`].
/// Values in `store` are perturbed in place and restored.
pub fn check_params<F>(
    store: &mut ParamStore,
    ids: &[ParamId],
    h: f64,
    abs_floor: f64,
    f: F,
) -> Result<GradCheck>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<Var>,
{
    let mut g = Graph::new();
    let y = f(&mut g, store)?;
    g.backward(y)?;
    let analytic: Vec<Option<Vec<f64>>> = ids
        .iter()
        .map(|&id| {
            let v = g.param(store, id);
            g.grad(v).map(|t| t.data().to_vec())
        })
        .collect();

    let eval = |store: &ParamStore| -> Result<f64> {
        let mut g = Graph::new();
        let y = f(&mut g, store)?;
        scalar(&g, y)
    };

    let mut report = GradCheck::new();
    for (k, &id) in ids.iter().enumerate() {
        for j in 0..store.value(id).len() {
            let x = store.value(id).data()[j];
            store.value_mut(id).data_mut()[j] = x + h;
            let up = eval(store)?;
            store.value_mut(id).data_mut()[j] = x - h;
            let down = eval(store)?;
            store.value_mut(id).data_mut()[j] = x;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[k].as_ref().map_or(0.0, |d| d[j]);
            report.record(a, numeric, abs_floor);
        }
    }
    Ok(report)
}
