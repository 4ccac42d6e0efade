//! Define-by-run reverse-mode differentiation.
//!
//! Every op appends a node holding its output value. `backward` walks the
//! nodes in reverse append order, which is a valid reverse topological order
//! because an op can only reference nodes that already exist.

use std::collections::HashMap;

use super::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Unary {
    Square,
    Sqrt,
    Abs,
    Exp,
    Log,
    Tanh,
    Relu,
    Softplus,
    Clamp(f64, f64),
    AddScalar(f64),
    MulScalar(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Binary {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Unary(Unary, Var),
    Binary(Binary, Var, Var),
    MatMul(Var, Var),
    Concat {
        inputs: Vec<Var>,
        axis: usize,
    },
    Slice {
        input: Var,
        axis: usize,
        start: usize,
    },
    Reshape(Var),
    SumAxis {
        input: Var,
        axis: usize,
    },
    SumAll(Var),
    RowNorm(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    grad: Option<Tensor>,
}

/// Append-only record of a forward computation.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
    frozen: HashMap<ParamId, Var>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A constant input; never receives gradients.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// A free leaf that collects gradients.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Loads a trainable parameter; repeated loads of the same id share one node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.leaf(store.value(id).clone());
        self.params.insert(id, v);
        v
    }

    /// Loads a parameter as a constant (no gradient path back to the store).
    pub fn frozen_param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.frozen.get(&id) {
            return v;
        }
        let v = self.constant(store.value(id).clone());
        self.frozen.insert(id, v);
        v
    }

    /// A constant copy of `v`'s current value.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.nodes[v.0].value.clone();
        self.constant(value)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    // ---------------------------------------------------------------- unary

    fn unary(&mut self, kind: Unary, x: Var) -> Result<Var> {
        let input = &self.nodes[x.0].value;
        let out = match kind {
            Unary::Square => input.map(|v| v * v),
            Unary::Sqrt => {
                check_positive("sqrt", input)?;
                input.map(f64::sqrt)
            }
            Unary::Abs => input.map(f64::abs),
            Unary::Exp => input.map(f64::exp),
            Unary::Log => {
                check_positive("log", input)?;
                input.map(f64::ln)
            }
            Unary::Tanh => input.map(f64::tanh),
            Unary::Relu => input.map(|v| v.max(0.0)),
            Unary::Softplus => input.map(softplus),
            Unary::Clamp(lo, hi) => input.map(|v| v.clamp(lo, hi)),
            Unary::AddScalar(c) => input.map(|v| v + c),
            Unary::MulScalar(c) => input.map(|v| v * c),
        };
        let rg = self.rg(x);
        Ok(self.push(out, Op::Unary(kind, x), rg))
    }

    pub fn square(&mut self, x: Var) -> Result<Var> {
        self.unary(Unary::Square, x)
    }

    /// Errors on any non-positive element.
    pub fn sqrt(&mut self, x: Var) -> Result<Var> {
        self.unary(Unary::Sqrt, x)
    }

    /// Subgradient 0 at 0.
    pub fn abs(&mut self, x: Var) -> Result<Var> {
        self.unary(Unary::Abs, x)
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        self.unary(Unary::Exp, x)
    }

    /// Errors on any non-positive element.
    pub fn log(&mut self, x: Var) -> Result<Var> {
        self.unary(Unary::Log, x)
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.unary(Unary::Tanh, x)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.unary(Unary::Relu, x)
    }

    pub fn softplus(&mut self, x: Var) -> Result<Var> {
        self.unary(Unary::Softplus, x)
    }

    /// Elementwise clamp; gradient passes only where `lo <= x <= hi`.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Result<Var> {
        if !(lo <= hi) {
            return Err(Error::InvalidArgument(format!(
                "clamp bounds out of order: [{lo}, {hi}]"
            )));
        }
        self.unary(Unary::Clamp(lo, hi), x)
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Result<Var> {
        self.unary(Unary::AddScalar(c), x)
    }

    pub fn mul_scalar(&mut self, x: Var, c: f64) -> Result<Var> {
        self.unary(Unary::MulScalar(c), x)
    }

    pub fn neg(&mut self, x: Var) -> Result<Var> {
        self.mul_scalar(x, -1.0)
    }

    // --------------------------------------------------------------- binary

    fn binary(&mut self, kind: Binary, a: Var, b: Var, name: &'static str) -> Result<Var> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let out_shape = broadcast_shape(name, va.shape(), vb.shape())?;
        let n: usize = out_shape.iter().product();
        let (la, lb) = (va.len(), vb.len());
        let (da, db) = (va.data(), vb.data());
        let mut out = Vec::with_capacity(n);
        let f = match kind {
            Binary::Add => |x: f64, y: f64| x + y,
            Binary::Sub => |x: f64, y: f64| x - y,
            Binary::Mul => |x: f64, y: f64| x * y,
            Binary::Div => |x: f64, y: f64| x / y,
        };
        for_each_index(la, lb, n, |_, i, j| out.push(f(da[i], db[j])));
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(out_shape, out)?, Op::Binary(kind, a, b), rg))
    }

    /// Elementwise sum. Operands may be equal-shaped, one may be a scalar, or
    /// one may match the other's shape without its leading (batch) axis.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Add, a, b, "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Sub, a, b, "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Mul, a, b, "mul")
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Div, a, b, "div")
    }

    /// Elementwise minimum, expressed as `(a + b − |a − b|) / 2`.
    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var> {
        let s = self.add(a, b)?;
        let d = self.sub(a, b)?;
        let d = self.abs(d)?;
        let m = self.sub(s, d)?;
        self.mul_scalar(m, 0.5)
    }

    /// `[m, k] × [k, n] → [m, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let (sa, sb) = (va.shape(), vb.shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::shape("matmul", sa, sb));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, va.data(), (k, 1), vb.data(), (n, 1), &mut out, 0.0);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMul(a, b), rg))
    }

    // ------------------------------------------------------------ structure

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat of zero inputs".into()))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(Error::InvalidArgument(format!(
                "concat axis {axis} out of range for shape {base:?}"
            )));
        }
        let mut total = 0;
        for v in inputs {
            let s = self.shape(*v);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(Error::shape("concat", &base, s));
            }
            total += s[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut out_shape = base.clone();
        out_shape[axis] = total;
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for v in inputs {
                let t = &self.nodes[v.0].value;
                let chunk = t.shape()[axis] * inner;
                out.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let rg = inputs.iter().any(|v| self.rg(*v));
        Ok(self.push(
            Tensor::new(out_shape, out)?,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// Elements `start..start + len` along `axis`.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() || start + len > shape[axis] {
            return Err(Error::InvalidArgument(format!(
                "slice [{start}, {}) on axis {axis} of shape {shape:?}",
                start + len
            )));
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let data = self.nodes[x.0].value.data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * shape[axis] + start) * inner;
            out.extend_from_slice(&data[base..base + len * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = len;
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::new(out_shape, out)?,
            Op::Slice {
                input: x,
                axis,
                start,
            },
            rg,
        ))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.nodes[x.0].value.clone().reshape(shape)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::Reshape(x), rg))
    }

    // ----------------------------------------------------------- reductions

    /// Sums over `axis`, removing it from the shape.
    pub fn sum_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::InvalidArgument(format!(
                "sum axis {axis} out of range for shape {shape:?}"
            )));
        }
        let outer: usize = shape[..axis].iter().product();
        let n = shape[axis];
        let inner: usize = shape[axis + 1..].iter().product();
        let data = self.nodes[x.0].value.data();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for a in 0..n {
                let src = &data[(o * n + a) * inner..(o * n + a + 1) * inner];
                for (dst, s) in out[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                    *dst += s;
                }
            }
        }
        let mut out_shape = shape;
        out_shape.remove(axis);
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::new(out_shape, out)?,
            Op::SumAxis { input: x, axis },
            rg,
        ))
    }

    pub fn mean_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let n = *self
            .shape(x)
            .get(axis)
            .ok_or_else(|| Error::InvalidArgument(format!("mean axis {axis} out of range")))?;
        let s = self.sum_axis(x, axis)?;
        self.mul_scalar(s, 1.0 / n as f64)
    }

    /// Sum of all elements as a scalar.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let total: f64 = self.nodes[x.0].value.data().iter().sum();
        let rg = self.rg(x);
        Ok(self.push(Tensor::scalar(total), Op::SumAll(x), rg))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let n = self.nodes[x.0].value.len();
        if n == 0 {
            return Err(Error::InvalidArgument("mean of empty array".into()));
        }
        let s = self.sum(x)?;
        self.mul_scalar(s, 1.0 / n as f64)
    }

    /// Euclidean norm over the last axis. Subgradient 0 for an all-zero row.
    pub fn row_norm(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let cols = *shape
            .last()
            .ok_or_else(|| Error::InvalidArgument("row_norm of a scalar".into()))?;
        let data = self.nodes[x.0].value.data();
        let out: Vec<f64> = data
            .chunks(cols.max(1))
            .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let out_shape = shape[..shape.len() - 1].to_vec();
        let rg = self.rg(x);
        Ok(self.push(Tensor::new(out_shape, out)?, Op::RowNorm(x), rg))
    }

    // ------------------------------------------------------------- backward

    /// Reverse pass from a single-element `loss`. Gradients accumulate into
    /// every node that requires them, so calling twice without
    /// [`Graph::zero_grad`] doubles them.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::Domain {
                op: "backward",
                msg: format!(
                    "loss must be a single element, got shape {:?}",
                    self.nodes[loss.0].value.shape()
                ),
            });
        }
        if !self.rg(loss) {
            return Ok(());
        }
        let mut grads: Vec<Option<Tensor>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.nodes[loss.0].value.shape(), 1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.propagate(i, &g, &mut grads);
            let node = &mut self.nodes[i];
            match &mut node.grad {
                Some(acc) => acc.add_assign(&g),
                None => node.grad = Some(g),
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        let out = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::Unary(kind, x) => {
                if !self.rg(*x) {
                    return;
                }
                let xv = self.nodes[x.0].value.data();
                let yv = out.data();
                let gd = g.data();
                let d: Vec<f64> = (0..gd.len())
                    .map(|j| gd[j] * unary_deriv(*kind, xv[j], yv[j]))
                    .collect();
                add_grad(grads, *x, out.shape(), d);
            }
            Op::Binary(kind, a, b) => {
                let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                let (la, lb) = (va.len(), vb.len());
                let (da, db, gd) = (va.data(), vb.data(), g.data());
                let n = gd.len();
                if self.rg(*a) {
                    let mut ga = vec![0.0; la];
                    match kind {
                        Binary::Add | Binary::Sub => {
                            for_each_index(la, lb, n, |k, i, _| ga[i] += gd[k])
                        }
                        Binary::Mul => for_each_index(la, lb, n, |k, i, j| ga[i] += gd[k] * db[j]),
                        Binary::Div => for_each_index(la, lb, n, |k, i, j| ga[i] += gd[k] / db[j]),
                    }
                    add_grad(grads, *a, va.shape(), ga);
                }
                if self.rg(*b) {
                    let mut gb = vec![0.0; lb];
                    match kind {
                        Binary::Add => for_each_index(la, lb, n, |k, _, j| gb[j] += gd[k]),
                        Binary::Sub => for_each_index(la, lb, n, |k, _, j| gb[j] -= gd[k]),
                        Binary::Mul => for_each_index(la, lb, n, |k, i, j| gb[j] += gd[k] * da[i]),
                        Binary::Div => for_each_index(la, lb, n, |k, i, j| {
                            gb[j] -= gd[k] * da[i] / (db[j] * db[j])
                        }),
                    }
                    add_grad(grads, *b, vb.shape(), gb);
                }
            }
            Op::MatMul(a, b) => {
                let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                let (m, k, n) = (va.shape()[0], va.shape()[1], vb.shape()[1]);
                if self.rg(*a) {
                    // dA = G · Bᵀ
                    let mut ga = vec![0.0; m * k];
                    gemm(m, n, k, g.data(), (n, 1), vb.data(), (1, n), &mut ga, 0.0);
                    add_grad(grads, *a, va.shape(), ga);
                }
                if self.rg(*b) {
                    // dB = Aᵀ · G
                    let mut gb = vec![0.0; k * n];
                    gemm(k, m, n, va.data(), (1, k), g.data(), (n, 1), &mut gb, 0.0);
                    add_grad(grads, *b, vb.shape(), gb);
                }
            }
            Op::Concat { inputs, axis } => {
                let shape = out.shape();
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[*axis + 1..].iter().product();
                let total = shape[*axis] * inner;
                let mut offset = 0;
                for v in inputs {
                    let s = self.nodes[v.0].value.shape();
                    let chunk = s[*axis] * inner;
                    if self.rg(*v) {
                        let mut gv = Vec::with_capacity(outer * chunk);
                        for o in 0..outer {
                            let base = o * total + offset;
                            gv.extend_from_slice(&g.data()[base..base + chunk]);
                        }
                        add_grad(grads, *v, s, gv);
                    }
                    offset += chunk;
                }
            }
            Op::Slice { input, axis, start } => {
                if !self.rg(*input) {
                    return;
                }
                let s = self.nodes[input.0].value.shape();
                let outer: usize = s[..*axis].iter().product();
                let inner: usize = s[*axis + 1..].iter().product();
                let len = out.shape()[*axis];
                let mut gi = vec![0.0; self.nodes[input.0].value.len()];
                for o in 0..outer {
                    let dst = (o * s[*axis] + start) * inner;
                    let src = o * len * inner;
                    gi[dst..dst + len * inner].copy_from_slice(&g.data()[src..src + len * inner]);
                }
                add_grad(grads, *input, s, gi);
            }
            Op::Reshape(x) => {
                if self.rg(*x) {
                    add_grad(grads, *x, self.nodes[x.0].value.shape(), g.data().to_vec());
                }
            }
            Op::SumAxis { input, axis } => {
                if !self.rg(*input) {
                    return;
                }
                let s = self.nodes[input.0].value.shape();
                let outer: usize = s[..*axis].iter().product();
                let n = s[*axis];
                let inner: usize = s[*axis + 1..].iter().product();
                let mut gi = Vec::with_capacity(outer * n * inner);
                for o in 0..outer {
                    for _ in 0..n {
                        gi.extend_from_slice(&g.data()[o * inner..(o + 1) * inner]);
                    }
                }
                add_grad(grads, *input, s, gi);
            }
            Op::SumAll(x) => {
                if self.rg(*x) {
                    let s = self.nodes[x.0].value.shape();
                    let n = self.nodes[x.0].value.len();
                    add_grad(grads, *x, s, vec![g.data()[0]; n]);
                }
            }
            Op::RowNorm(x) => {
                if !self.rg(*x) {
                    return;
                }
                let xv = &self.nodes[x.0].value;
                let cols = *xv.shape().last().unwrap();
                let mut gi = vec![0.0; xv.len()];
                for (r, (norm, gr)) in out.data().iter().zip(g.data()).enumerate() {
                    if *norm > 0.0 {
                        for c in 0..cols {
                            gi[r * cols + c] = gr * xv.data()[r * cols + c] / norm;
                        }
                    }
                }
                add_grad(grads, *x, xv.shape(), gi);
            }
        }
    }

    /// Adds the gradients collected on parameter nodes into `store`.
    pub fn write_param_grads(&self, store: &mut ParamStore) {
        let mut ids: Vec<_> = self.params.iter().collect();
        ids.sort_by_key(|(id, _)| **id);
        for (id, v) in ids {
            if let Some(g) = &self.nodes[v.0].grad {
                store.accumulate_grad(*id, g);
            }
        }
    }
}

/// Visits `(out, a, b)` flat indices of a broadcast binary op in output
/// order. The shorter operand repeats with its own length as period.
#[inline(always)]
fn for_each_index(la: usize, lb: usize, n: usize, mut f: impl FnMut(usize, usize, usize)) {
    if la == n && lb == n {
        for k in 0..n {
            f(k, k, k);
        }
    } else if la == n {
        let mut k = 0;
        while k < n {
            for j in 0..lb {
                f(k, k, j);
                k += 1;
            }
        }
    } else {
        let mut k = 0;
        while k < n {
            for i in 0..la {
                f(k, i, k);
                k += 1;
            }
        }
    }
}

fn add_grad(grads: &mut [Option<Tensor>], v: Var, shape: &[usize], data: Vec<f64>) {
    match &mut grads[v.0] {
        Some(acc) => {
            for (a, d) in acc.data_mut().iter_mut().zip(data) {
                *a += d;
            }
        }
        slot @ None => {
            *slot = Some(Tensor::new(shape.to_vec(), data).expect("gradient shape"));
        }
    }
}

fn unary_deriv(kind: Unary, x: f64, y: f64) -> f64 {
    match kind {
        Unary::Square => 2.0 * x,
        Unary::Sqrt => 0.5 / y,
        Unary::Abs => {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
        Unary::Exp => y,
        Unary::Log => 1.0 / x,
        Unary::Tanh => 1.0 - y * y,
        Unary::Relu => {
            if x > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Unary::Softplus => sigmoid(x),
        Unary::Clamp(lo, hi) => {
            if x >= lo && x <= hi {
                1.0
            } else {
                0.0
            }
        }
        Unary::AddScalar(_) => 1.0,
        Unary::MulScalar(c) => c,
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_positive(op: &'static str, t: &Tensor) -> Result<()> {
    if let Some((i, v)) = t.data().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::domain(
            op,
            format!("non-positive input {v} at flat index {i} (clamp upstream)"),
        ));
    }
    Ok(())
}

fn broadcast_shape(op: &'static str, a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let numel = |s: &[usize]| s.iter().product::<usize>();
    if a == b {
        return Ok(a.to_vec());
    }
    if numel(b) == 1 && b.len() <= 1 {
        return Ok(a.to_vec());
    }
    if numel(a) == 1 && a.len() <= 1 {
        return Ok(b.to_vec());
    }
    if a.len() == b.len() + 1 && &a[1..] == b {
        return Ok(a.to_vec());
    }
    if b.len() == a.len() + 1 && &b[1..] == a {
        return Ok(b.to_vec());
    }
    Err(Error::shape(op, a, b))
}

/// `c = a · b + beta·c` with explicit (row, column) strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    c: &mut [f64],
    beta: f64,
) {
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the strides describe in-bounds views of `a` ([m, k]), `b` ([k, n])
    // and the row-major output `c` ([m, n]); callers size the slices accordingly.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn tanh_at_zero() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(0.0));
        let y = g.tanh(x).unwrap();
        assert_eq!(g.value(y).item().unwrap(), 0.0);
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap().item().unwrap(), 1.0);
    }

    #[test]
    fn identity_matmul() {
        let mut g = Graph::new();
        let m = t(&[3, 3], &[1., -2., 3., 4., 5., -6., 7., 8., 9.5]);
        let i = g.constant(Tensor::eye(3));
        let mv = g.constant(m.clone());
        let out = g.matmul(i, mv).unwrap();
        assert_eq!(g.value(out), &m);
    }

    #[test]
    fn sum_of_squares() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![1., 2., 3.]));
        let sq = g.square(x).unwrap();
        let s = g.sum(sq).unwrap();
        assert_eq!(g.value(s).item().unwrap(), 14.0);
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap().data(), &[2., 4., 6.]);
    }

    #[test]
    fn square_grad_and_accumulation() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(3.0));
        let y = g.square(x).unwrap();
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap().item().unwrap(), 6.0);
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap().item().unwrap(), 12.0);
        g.zero_grad();
        assert!(g.grad(x).is_none());
    }

    #[test]
    fn abs_subgradient_at_zero() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(0.0));
        let y = g.abs(x).unwrap();
        g.backward(y).unwrap();
        assert_eq!(g.grad(x).unwrap().item().unwrap(), 0.0);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![1., 2.]));
        assert!(matches!(g.backward(x), Err(Error::Domain { .. })));
    }

    #[test]
    fn shape_mismatch_reports_both_shapes() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(&[2, 3]));
        let b = g.constant(Tensor::zeros(&[4, 5]));
        let msg = g.matmul(a, b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[4, 5]"), "{msg}");
        let msg = g.add(a, b).unwrap_err().to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[4, 5]"), "{msg}");
    }

    #[test]
    fn log_and_sqrt_reject_non_positive() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::vector(vec![1.0, 0.0]));
        assert!(g.log(x).is_err());
        assert!(g.sqrt(x).is_err());
        let y = g.constant(Tensor::vector(vec![1.0, -2.0]));
        assert!(g.log(y).is_err());
    }

    #[test]
    fn batch_broadcast_bias_grad_sums_leading_axis() {
        let mut g = Graph::new();
        let x = g.constant(t(&[2, 3], &[1., 2., 3., 4., 5., 6.]));
        let b = g.leaf(Tensor::vector(vec![0.5, 0.5, 0.5]));
        let y = g.add(x, b).unwrap();
        assert_eq!(g.value(y).data(), &[1.5, 2.5, 3.5, 4.5, 5.5, 6.5]);
        let s = g.sum(y).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(b).unwrap().data(), &[2., 2., 2.]);
    }

    #[test]
    fn constants_get_no_grad() {
        let mut g = Graph::new();
        let c = g.constant(Tensor::scalar(2.0));
        let x = g.leaf(Tensor::scalar(3.0));
        let y = g.mul(c, x).unwrap();
        g.backward(y).unwrap();
        assert!(g.grad(c).is_none());
        assert_eq!(g.grad(x).unwrap().item().unwrap(), 2.0);
    }

    #[test]
    fn concat_and_slice_round_trip() {
        let mut g = Graph::new();
        let a = g.leaf(t(&[2, 2], &[1., 2., 3., 4.]));
        let b = g.leaf(t(&[2, 1], &[5., 6.]));
        let c = g.concat(&[a, b], 1).unwrap();
        assert_eq!(g.value(c).data(), &[1., 2., 5., 3., 4., 6.]);
        let s = g.slice(c, 1, 1, 2).unwrap();
        assert_eq!(g.value(s).data(), &[2., 5., 4., 6.]);
        let l = g.sum(s).unwrap();
        g.backward(l).unwrap();
        assert_eq!(g.grad(a).unwrap().data(), &[0., 1., 0., 1.]);
        assert_eq!(g.grad(b).unwrap().data(), &[1., 1.]);
    }

    #[test]
    fn minimum_picks_smaller() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::vector(vec![1., 5., -2.]));
        let b = g.constant(Tensor::vector(vec![3., 4., -2.]));
        let m = g.minimum(a, b).unwrap();
        assert_eq!(g.value(m).data(), &[1., 4., -2.]);
    }
}
