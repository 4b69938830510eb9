use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::params::{Gradients, ParamId, ParamStore};
use super::{elu, matmul_into, matmul_nt_into, matmul_tn_into, softmax_rows, Tensor};
use crate::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Input,
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulNT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulCol(Var, Var),
    Scale(Var, f64),
    Elu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Abs(Var),
    SoftmaxRows(Var),
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    Reshape(Var),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    SliceCols { x: Var, start: usize },
    Sum(Var),
    RowSums(Var),
    PickCols(Var, Vec<usize>),
    Mse(Var, Var),
    WeightedSqErr(Var, Var, Vec<f64>),
}

#[derive(Clone, Debug)]
struct Node {
    value: Arc<Tensor>,
    op: Op,
    needs_grad: bool,
}

/// Append-only record of a computation. Nodes are stored in creation order,
/// which is a topological order, so the reverse sweep is a single pass.
#[derive(Clone, Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

/// Result of [`Graph::backward`].
#[derive(Clone, Debug)]
pub struct Grads {
    params: Gradients,
    leaves: Vec<(Var, Tensor)>,
}

impl Grads {
    pub fn params(&self) -> &Gradients {
        &self.params
    }

    pub fn into_params(self) -> Gradients {
        self.params
    }

    /// Gradient with respect to a node created by [`Graph::leaf`].
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.leaves.iter().find(|(l, _)| *l == v).map(|(_, t)| t)
    }
}

fn shape_err(what: &str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape(format!("{what}: {:?} vs {:?}", a.shape(), b.shape()))
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.push_shared(Arc::new(value), op, needs_grad)
    }

    fn push_shared(&mut self, value: Arc<Tensor>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vs: &[Var]) -> bool {
        vs.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// Constant input; no gradient flows into it.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Input, false)
    }

    /// Free variable whose gradient is reported by [`Grads::wrt`].
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Node bound to a stored parameter. Repeated calls reuse the node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(Some(v)) = self.param_vars.get(id.0) {
            return *v;
        }
        let v = self.push_shared(store.shared(id), Op::Param(id), true);
        if self.param_vars.len() <= id.0 {
            self.param_vars.resize(id.0 + 1, None);
        }
        self.param_vars[id.0] = Some(v);
        v
    }

    /// Parameter value treated as a constant (target networks).
    pub fn frozen_param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push_shared(store.shared(id), Op::Input, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let ((m, k), (k2, n)) = (av.dims(), bv.dims());
        if k != k2 {
            return Err(shape_err("matmul", av, bv));
        }
        let mut out = vec![0.0; m * n];
        matmul_into(av.data(), bv.data(), &mut out, m, k, n);
        let needs = self.needs(&[a, b]);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a, b), needs))
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let ((m, k), (n, k2)) = (av.dims(), bv.dims());
        if k != k2 {
            return Err(shape_err("matmul_nt", av, bv));
        }
        let mut out = vec![0.0; m * n];
        matmul_nt_into(av.data(), bv.data(), &mut out, m, k, n);
        let needs = self.needs(&[a, b]);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMulNT(a, b), needs))
    }

    fn zip_same(&mut self, a: Var, b: Var, what: &str, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.dims() != bv.dims() {
            return Err(shape_err(what, av, bv));
        }
        let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| f(x, y)).collect();
        let t = Tensor::new(av.shape().to_vec(), data)?;
        let needs = self.needs(&[a, b]);
        Ok(self.push(t, op, needs))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_same(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    /// `a + row` with `row: 1 × cols` broadcast over the rows of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (av, rv) = (self.value(a), self.value(row));
        let (r, c) = av.dims();
        if rv.dims() != (1, c) {
            return Err(shape_err("add_row", av, rv));
        }
        let mut out = av.data().to_vec();
        for i in 0..r {
            for (o, &b) in out[i * c..(i + 1) * c].iter_mut().zip(rv.data()) {
                *o += b;
            }
        }
        let needs = self.needs(&[a, row]);
        Ok(self.push(Tensor::matrix(r, c, out)?, Op::AddRow(a, row), needs))
    }

    /// `a * col` with `col: rows × 1` broadcast over the columns of `a`.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Result<Var> {
        let (av, cv) = (self.value(a), self.value(col));
        let (r, c) = av.dims();
        if cv.len() != r {
            return Err(shape_err("mul_col", av, cv));
        }
        let mut out = av.data().to_vec();
        for i in 0..r {
            let s = cv.data()[i];
            for o in &mut out[i * c..(i + 1) * c] {
                *o *= s;
            }
        }
        let needs = self.needs(&[a, col]);
        Ok(self.push(Tensor::matrix(r, c, out)?, Op::MulCol(a, col), needs))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let t = self.value(a).map(|v| v * s);
        let needs = self.needs(&[a]);
        self.push(t, Op::Scale(a, s), needs)
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let t = self.value(a).map(f);
        let needs = self.needs(&[a]);
        self.push(t, op, needs)
    }

    pub fn elu(&mut self, a: Var) -> Var {
        self.unary(a, elu, Op::Elu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(
            a,
            |x| {
                if x >= 0.0 {
                    1.0 / (1.0 + libm::exp(-x))
                } else {
                    let e = libm::exp(x);
                    e / (1.0 + e)
                }
            },
            Op::Sigmoid(a),
        )
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, libm::tanh, Op::Tanh(a))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.unary(a, libm::fabs, Op::Abs(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let t = softmax_rows(self.value(a));
        let needs = self.needs(&[a]);
        self.push(t, Op::SoftmaxRows(a), needs)
    }

    /// Per-row normalisation to zero mean and unit variance, then `* gain + bias`
    /// (`gain`, `bias`: `1 × cols`).
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let xv = self.value(x);
        let (r, c) = xv.dims();
        let (gv, bv) = (self.value(gain), self.value(bias));
        if gv.dims() != (1, c) || bv.dims() != (1, c) {
            return Err(shape_err("layer_norm gain/bias", xv, gv));
        }
        let mut xhat = vec![0.0; r * c];
        let mut inv_std = vec![0.0; r];
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let row = &xv.data()[i * c..(i + 1) * c];
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let is = 1.0 / libm::sqrt(var + eps);
            inv_std[i] = is;
            for j in 0..c {
                let h = (row[j] - mean) * is;
                xhat[i * c + j] = h;
                out[i * c + j] = h * gv.data()[j] + bv.data()[j];
            }
        }
        let needs = self.needs(&[x, gain, bias]);
        Ok(self.push(Tensor::matrix(r, c, out)?, Op::LayerNorm { x, gain, bias, xhat, inv_std }, needs))
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let t = self.value(a).clone().reshaped(shape)?;
        let needs = self.needs(&[a]);
        Ok(self.push(t, Op::Reshape(a), needs))
    }

    /// Stacks matrices with equal column counts.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or_else(|| Error::Shape("concat of nothing".into()))?;
        let c = self.value(*first).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let v = self.value(p);
            if v.cols() != c {
                return Err(shape_err("concat_rows", self.value(*first), v));
            }
            rows += v.rows();
            data.extend_from_slice(v.data());
        }
        let needs = self.needs(parts);
        Ok(self.push(Tensor::matrix(rows, c, data)?, Op::ConcatRows(parts.to_vec()), needs))
    }

    /// Places matrices with equal row counts side by side.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or_else(|| Error::Shape("concat of nothing".into()))?;
        let r = self.value(*first).rows();
        let mut cols = 0;
        for &p in parts {
            let v = self.value(p);
            if v.rows() != r {
                return Err(shape_err("concat_cols", self.value(*first), v));
            }
            cols += v.cols();
        }
        let mut data = Vec::with_capacity(r * cols);
        for i in 0..r {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(i));
            }
        }
        let needs = self.needs(parts);
        Ok(self.push(Tensor::matrix(r, cols, data)?, Op::ConcatCols(parts.to_vec()), needs))
    }

    /// Row `j` of the result is row `idx[j]` of `a`.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let av = self.value(a);
        let (r, c) = av.dims();
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            if i >= r {
                return Err(Error::Shape(format!("row {i} out of range for {r} rows")));
            }
            data.extend_from_slice(av.row_slice(i));
        }
        let needs = self.needs(&[a]);
        Ok(self.push(Tensor::matrix(idx.len(), c, data)?, Op::GatherRows(a, idx.to_vec()), needs))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let idx: Vec<usize> = (start..start + len).collect();
        self.gather_rows(a, &idx)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let av = self.value(a);
        let (r, c) = av.dims();
        if start + len > c {
            return Err(Error::Shape(format!("columns {start}..{} out of range for {c}", start + len)));
        }
        let mut data = Vec::with_capacity(r * len);
        for i in 0..r {
            data.extend_from_slice(&av.row_slice(i)[start..start + len]);
        }
        let needs = self.needs(&[a]);
        Ok(self.push(Tensor::matrix(r, len, data)?, Op::SliceCols { x: a, start }, needs))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let needs = self.needs(&[a]);
        self.push(Tensor::scalar(s), Op::Sum(a), needs)
    }

    /// Sum of each row, as a `rows × 1` column.
    pub fn row_sums(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let r = av.rows();
        let data: Vec<f64> = (0..r).map(|i| av.row_slice(i).iter().sum()).collect();
        let needs = self.needs(&[a]);
        self.push(Tensor { shape: vec![r, 1], data }, Op::RowSums(a), needs)
    }

    /// Column `idx[i]` of each row `i`, as a `rows × 1` column.
    pub fn pick_cols(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let av = self.value(a);
        let (r, c) = av.dims();
        if idx.len() != r || idx.iter().any(|&j| j >= c) {
            return Err(Error::Shape(format!("pick_cols: {} indices for {r}×{c}", idx.len())));
        }
        let data = idx.iter().enumerate().map(|(i, &j)| av.get(i, j)).collect();
        let needs = self.needs(&[a]);
        Ok(self.push(Tensor { shape: vec![r, 1], data }, Op::PickCols(a, idx.to_vec()), needs))
    }

    /// Mean of squared differences.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.len() != bv.len() || av.is_empty() {
            return Err(shape_err("mse", av, bv));
        }
        let n = av.len() as f64;
        let s = av.data().iter().zip(bv.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n;
        let needs = self.needs(&[a, b]);
        Ok(self.push(Tensor::scalar(s), Op::Mse(a, b), needs))
    }

    /// `Σ wᵢ (aᵢ − bᵢ)²`.
    pub fn weighted_sq_err(&mut self, a: Var, b: Var, weights: Vec<f64>) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.len() != bv.len() || av.len() != weights.len() {
            return Err(shape_err("weighted_sq_err", av, bv));
        }
        let s = av.data().iter().zip(bv.data()).zip(&weights).map(|((x, y), w)| w * (x - y) * (x - y)).sum();
        let needs = self.needs(&[a, b]);
        Ok(self.push(Tensor::scalar(s), Op::WeightedSqErr(a, b, weights), needs))
    }

    /// Reverse sweep from the scalar node `out`.
    pub fn backward(&self, out: Var) -> Result<Grads> {
        if self.value(out).len() != 1 {
            return Err(Error::Contract(format!("backward needs a scalar output, got shape {:?}", self.value(out).shape())));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; out.0 + 1];
        grads[out.0] = Some(vec![1.0]);
        let mut params = vec![None; self.param_vars.len()];
        let mut leaves = Vec::new();

        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            self.backprop_node(node, &g, &mut grads);
            match node.op {
                Op::Param(id) => params[id.0] = Some(Tensor::new(node.value.shape().to_vec(), g)?),
                Op::Leaf => leaves.push((Var(i), Tensor::new(node.value.shape().to_vec(), g)?)),
                _ => {}
            }
        }
        Ok(Grads { params: Gradients::from_vec(params), leaves })
    }

    fn backprop_node(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !nodes[v.0].needs_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.len()]);
            f(slot);
        };
        let val = |v: Var| &nodes[v.0].value;
        let y = node.value.data();

        match &node.op {
            Op::Input | Op::Leaf | Op::Param(_) => {}
            &Op::MatMul(a, b) => {
                let ((m, k), n) = (val(a).dims(), val(b).cols());
                acc(a, &mut |da| matmul_nt_into(g, val(b).data(), da, m, n, k));
                acc(b, &mut |db| matmul_tn_into(val(a).data(), g, db, m, k, n));
            }
            &Op::MatMulNT(a, b) => {
                let ((m, k), n) = (val(a).dims(), val(b).rows());
                acc(a, &mut |da| matmul_into(g, val(b).data(), da, m, n, k));
                acc(b, &mut |db| matmul_tn_into(g, val(a).data(), db, m, n, k));
            }
            &Op::Add(a, b) => {
                acc(a, &mut |d| d.iter_mut().zip(g).for_each(|(d, g)| *d += g));
                acc(b, &mut |d| d.iter_mut().zip(g).for_each(|(d, g)| *d += g));
            }
            &Op::Sub(a, b) => {
                acc(a, &mut |d| d.iter_mut().zip(g).for_each(|(d, g)| *d += g));
                acc(b, &mut |d| d.iter_mut().zip(g).for_each(|(d, g)| *d -= g));
            }
            &Op::Mul(a, b) => {
                acc(a, &mut |d| {
                    for ((d, g), y) in d.iter_mut().zip(g).zip(val(b).data()) {
                        *d += g * y;
                    }
                });
                acc(b, &mut |d| {
                    for ((d, g), x) in d.iter_mut().zip(g).zip(val(a).data()) {
                        *d += g * x;
                    }
                });
            }
            &Op::AddRow(a, row) => {
                let c = val(a).cols();
                acc(a, &mut |d| d.iter_mut().zip(g).for_each(|(d, g)| *d += g));
                acc(row, &mut |d| {
                    for chunk in g.chunks(c) {
                        d.iter_mut().zip(chunk).for_each(|(d, g)| *d += g);
                    }
                });
            }
            &Op::MulCol(a, col) => {
                let c = val(a).cols();
                let cv = val(col).data();
                acc(a, &mut |d| {
                    for (i, (dr, gr)) in d.chunks_mut(c).zip(g.chunks(c)).enumerate() {
                        dr.iter_mut().zip(gr).for_each(|(d, g)| *d += g * cv[i]);
                    }
                });
                acc(col, &mut |d| {
                    for (i, (gr, ar)) in g.chunks(c).zip(val(a).data().chunks(c)).enumerate() {
                        d[i] += gr.iter().zip(ar).map(|(g, x)| g * x).sum::<f64>();
                    }
                });
            }
            &Op::Scale(a, s) => acc(a, &mut |d| d.iter_mut().zip(g).for_each(|(d, g)| *d += s * g)),
            &Op::Elu(a) => acc(a, &mut |d| {
                for ((d, g), (&x, &y)) in d.iter_mut().zip(g).zip(val(a).data().iter().zip(y)) {
                    *d += if x > 0.0 { *g } else { g * (y + 1.0) };
                }
            }),
            &Op::Sigmoid(a) => acc(a, &mut |d| {
                for ((d, g), y) in d.iter_mut().zip(g).zip(y) {
                    *d += g * y * (1.0 - y);
                }
            }),
            &Op::Tanh(a) => acc(a, &mut |d| {
                for ((d, g), y) in d.iter_mut().zip(g).zip(y) {
                    *d += g * (1.0 - y * y);
                }
            }),
            &Op::Abs(a) => acc(a, &mut |d| {
                for ((d, g), x) in d.iter_mut().zip(g).zip(val(a).data()) {
                    *d += if *x > 0.0 {
                        *g
                    } else if *x < 0.0 {
                        -g
                    } else {
                        0.0
                    };
                }
            }),
            &Op::SoftmaxRows(a) => {
                let c = node.value.cols();
                acc(a, &mut |d| {
                    for ((dr, gr), yr) in d.chunks_mut(c).zip(g.chunks(c)).zip(y.chunks(c)) {
                        let dot: f64 = gr.iter().zip(yr).map(|(g, y)| g * y).sum();
                        for ((d, g), y) in dr.iter_mut().zip(gr).zip(yr) {
                            *d += y * (g - dot);
                        }
                    }
                });
            }
            Op::LayerNorm { x, gain, bias, xhat, inv_std } => {
                let c = node.value.cols();
                let gain_v = val(*gain).data();
                acc(*gain, &mut |d| {
                    for (gr, hr) in g.chunks(c).zip(xhat.chunks(c)) {
                        for ((d, g), h) in d.iter_mut().zip(gr).zip(hr) {
                            *d += g * h;
                        }
                    }
                });
                acc(*bias, &mut |d| {
                    for gr in g.chunks(c) {
                        d.iter_mut().zip(gr).for_each(|(d, g)| *d += g);
                    }
                });
                acc(*x, &mut |d| {
                    for (i, ((dr, gr), hr)) in d.chunks_mut(c).zip(g.chunks(c)).zip(xhat.chunks(c)).enumerate() {
                        let mut mean_dh = 0.0;
                        let mut mean_dh_h = 0.0;
                        for j in 0..c {
                            let dh = gr[j] * gain_v[j];
                            mean_dh += dh;
                            mean_dh_h += dh * hr[j];
                        }
                        mean_dh /= c as f64;
                        mean_dh_h /= c as f64;
                        for j in 0..c {
                            let dh = gr[j] * gain_v[j];
                            dr[j] += inv_std[i] * (dh - mean_dh - hr[j] * mean_dh_h);
                        }
                    }
                });
            }
            &Op::Reshape(a) => acc(a, &mut |d| d.iter_mut().zip(g).for_each(|(d, g)| *d += g)),
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let n = val(p).len();
                    acc(p, &mut |d| d.iter_mut().zip(&g[off..off + n]).for_each(|(d, g)| *d += g));
                    off += n;
                }
            }
            Op::ConcatCols(parts) => {
                let total = node.value.cols();
                let mut off = 0;
                for &p in parts {
                    let c = val(p).cols();
                    acc(p, &mut |d| {
                        for (dr, gr) in d.chunks_mut(c).zip(g.chunks(total)) {
                            dr.iter_mut().zip(&gr[off..off + c]).for_each(|(d, g)| *d += g);
                        }
                    });
                    off += c;
                }
            }
            Op::GatherRows(a, idx) => {
                let c = val(*a).cols();
                acc(*a, &mut |d| {
                    for (j, &i) in idx.iter().enumerate() {
                        d[i * c..(i + 1) * c].iter_mut().zip(&g[j * c..(j + 1) * c]).for_each(|(d, g)| *d += g);
                    }
                });
            }
            &Op::SliceCols { x, start } => {
                let c = val(x).cols();
                let len = node.value.cols();
                acc(x, &mut |d| {
                    for (dr, gr) in d.chunks_mut(c).zip(g.chunks(len)) {
                        dr[start..start + len].iter_mut().zip(gr).for_each(|(d, g)| *d += g);
                    }
                });
            }
            &Op::Sum(a) => acc(a, &mut |d| d.iter_mut().for_each(|d| *d += g[0])),
            &Op::RowSums(a) => {
                let c = val(a).cols();
                acc(a, &mut |d| {
                    for (dr, g) in d.chunks_mut(c).zip(g) {
                        dr.iter_mut().for_each(|d| *d += g);
                    }
                });
            }
            Op::PickCols(a, idx) => {
                let c = val(*a).cols();
                acc(*a, &mut |d| {
                    for (i, &j) in idx.iter().enumerate() {
                        d[i * c + j] += g[i];
                    }
                });
            }
            &Op::Mse(a, b) => {
                let n = val(a).len() as f64;
                let (av, bv) = (val(a).data(), val(b).data());
                acc(a, &mut |d| {
                    for (i, d) in d.iter_mut().enumerate() {
                        *d += 2.0 * (av[i] - bv[i]) / n * g[0];
                    }
                });
                acc(b, &mut |d| {
                    for (i, d) in d.iter_mut().enumerate() {
                        *d -= 2.0 * (av[i] - bv[i]) / n * g[0];
                    }
                });
            }
            Op::WeightedSqErr(a, b, w) => {
                let (av, bv) = (val(*a).data(), val(*b).data());
                acc(*a, &mut |d| {
                    for (i, d) in d.iter_mut().enumerate() {
                        *d += 2.0 * w[i] * (av[i] - bv[i]) * g[0];
                    }
                });
                acc(*b, &mut |d| {
                    for (i, d) in d.iter_mut().enumerate() {
                        *d -= 2.0 * w[i] * (av[i] - bv[i]) * g[0];
                    }
                });
            }
        }
    }
}
