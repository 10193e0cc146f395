use crate::batchnorm::{BatchNormState, BnMode};
use crate::error::{arg_err, shape_err, Result, TensorError};
use crate::param::{ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

pub(crate) enum Op<T> {
    Leaf,
    Param(ParamId),
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    MatMul {
        a: Var,
        b: Var,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Softmax {
        x: Var,
        outer: usize,
        len: usize,
        inner: usize,
    },
    Concat {
        inputs: Vec<Var>,
        outer: usize,
        widths: Vec<usize>,
        inner: usize,
    },
    Mean {
        x: Var,
        outer: usize,
        len: usize,
        inner: usize,
    },
    SumAll(Var),
    Reshape(Var),
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<T>,
        /// `groups x d`
        inv_std: Vec<T>,
        groups: usize,
        train: bool,
    },
    PairSum {
        base: Option<Var>,
        a: Var,
        c: Var,
        batch: usize,
        n: usize,
        d: usize,
    },
    GatedNeighborSum {
        gate: Var,
        v: Var,
        batch: usize,
        n: usize,
        d: usize,
    },
    WeightedNodeSum {
        h: Var,
        w: Vec<T>,
        batch: usize,
        n: usize,
        d: usize,
    },
    AttnScores {
        q: Var,
        k: Var,
        batch: usize,
        n: usize,
        d: usize,
        heads: usize,
    },
    AttnCombine {
        a: Var,
        v: Var,
        batch: usize,
        n: usize,
        d: usize,
        heads: usize,
    },
    SelectLogProb {
        logits: Var,
        probs: Vec<T>,
        actions: Vec<usize>,
        n: usize,
    },
    WeightedSum {
        x: Var,
        w: Vec<T>,
    },
}

pub(crate) struct Node<T> {
    pub value: Tensor<T>,
    pub op: Op<T>,
    pub requires_grad: bool,
}

/// A define-by-run tape.
pub struct Graph<T> {
    pub(crate) nodes: Vec<Node<T>>,
    grad_enabled: bool,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

impl<T: Scalar> Graph<T> {
    /// Tape whose parameters require gradients.
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grad_enabled: true,
        }
    }

    /// Tape for evaluation only: parameters are recorded as constants.
    pub fn inference() -> Self {
        Self {
            nodes: Vec::new(),
            grad_enabled: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every node recorded after the first `len`. Handles to dropped
    /// nodes must not be used afterwards.
    pub fn truncate(&mut self, len: usize) {
        self.nodes.truncate(len);
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, op_name: &'static str, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Result<Var> {
        if !value.all_finite() {
            return Err(TensorError::NonFinite { op: op_name });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Input whose gradient is reported by [`Graph::backward`].
    pub fn tracked(&mut self, value: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records the current value of a stored parameter.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: store.get(id).value.clone(),
            op: Op::Param(id),
            requires_grad: self.grad_enabled,
        });
        Var(self.nodes.len() - 1)
    }

    /// `x · w + b` over the last axis: `x` is `[.., k]`, `w` is `[k, m]`,
    /// `b` is `[m]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        if ws.len() != 2 || xs.last() != Some(&ws[0]) {
            return shape_err("linear", &xs, &ws);
        }
        let (k, m) = (ws[0], ws[1]);
        if let Some(b) = b {
            if self.shape(b) != [m] {
                return shape_err("linear(bias)", self.shape(b), &[m]);
            }
        }
        let rows = self.value(x).numel() / k.max(1);
        let mut out = vec![T::zero(); rows * m];
        T::gemm(
            rows,
            k,
            m,
            T::one(),
            self.value(x).data(),
            k,
            1,
            self.value(w).data(),
            m,
            1,
            T::zero(),
            &mut out,
        );
        if let Some(b) = b {
            let bias = self.value(b).data();
            for row in out.chunks_exact_mut(m) {
                for (o, &bv) in row.iter_mut().zip(bias) {
                    *o += bv;
                }
            }
        }
        let mut shape = xs;
        *shape.last_mut().unwrap() = m;
        let value = Tensor::new(&shape, out)?;
        let mut inputs = vec![x, w];
        inputs.extend(b);
        self.push("linear", value, Op::Linear { x, w, b }, &inputs)
    }

    /// Matrix product of `[r, k]` and `[k, m]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (as_, bs) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if as_.len() != 2 || bs.len() != 2 || as_[1] != bs[0] {
            return shape_err("matmul", &as_, &bs);
        }
        let (r, k, m) = (as_[0], as_[1], bs[1]);
        let mut out = vec![T::zero(); r * m];
        T::gemm(
            r,
            k,
            m,
            T::one(),
            self.value(a).data(),
            k,
            1,
            self.value(b).data(),
            m,
            1,
            T::zero(),
            &mut out,
        );
        let value = Tensor::new(&[r, m], out)?;
        self.push("matmul", value, Op::MatMul { a, b }, &[a, b])
    }

    fn zip(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
        if self.shape(a) != self.shape(b) {
            return shape_err(name, self.shape(a), self.shape(b));
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(self.shape(a), data)
    }

    fn map(&self, a: Var, f: impl Fn(T) -> T) -> Tensor<T> {
        let data = self.value(a).data().iter().map(|&x| f(x)).collect();
        Tensor::new(self.shape(a), data).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip("add", a, b, |x, y| x + y)?;
        self.push("add", v, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip("sub", a, b, |x, y| x - y)?;
        self.push("sub", v, Op::Sub(a, b), &[a, b])
    }

    /// Element-wise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip("mul", a, b, |x, y| x * y)?;
        self.push("mul", v, Op::Mul(a, b), &[a, b])
    }

    pub fn scale(&mut self, a: Var, c: T) -> Result<Var> {
        let v = self.map(a, |x| x * c);
        self.push("scale", v, Op::Scale(a, c), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let v = self.map(a, |x| if x > T::zero() { x } else { T::zero() });
        self.push("relu", v, Op::Relu(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let v = self.map(a, |x| T::one() / (T::one() + (-x).exp()));
        self.push("sigmoid", v, Op::Sigmoid(a), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let v = self.map(a, |x| x.tanh());
        self.push("tanh", v, Op::Tanh(a), &[a])
    }

    /// Softmax along `axis`. With a mask (same length as `x`, `true` =
    /// allowed) excluded entries get probability exactly zero.
    pub fn softmax(&mut self, x: Var, axis: usize, mask: Option<&[bool]>) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return arg_err("softmax", format!("axis {axis} out of range for {shape:?}"));
        }
        let (outer, len, inner) = split_axis(&shape, axis);
        if len == 0 {
            return arg_err("softmax", "empty axis");
        }
        if let Some(m) = mask {
            if m.len() != self.value(x).numel() {
                return shape_err("softmax(mask)", &shape, &[m.len()]);
            }
        }
        let allowed = |idx: usize| mask.map_or(true, |m| m[idx]);
        let xv = self.value(x).data();
        let mut out = vec![T::zero(); xv.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |l: usize| (o * len + l) * inner + i;
                let mut max = T::neg_infinity();
                for l in 0..len {
                    if allowed(at(l)) && xv[at(l)] > max {
                        max = xv[at(l)];
                    }
                }
                if max == T::neg_infinity() {
                    return arg_err("softmax", "every entry of a slice is masked");
                }
                let mut total = T::zero();
                for l in 0..len {
                    if allowed(at(l)) {
                        let e = (xv[at(l)] - max).exp();
                        out[at(l)] = e;
                        total += e;
                    }
                }
                for l in 0..len {
                    out[at(l)] /= total;
                }
            }
        }
        let value = Tensor::new(&shape, out)?;
        self.push("softmax", value, Op::Softmax { x, outer, len, inner }, &[x])
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let Some(&first) = inputs.first() else {
            return arg_err("concat", "no inputs");
        };
        let base = self.shape(first).to_vec();
        if axis >= base.len() {
            return arg_err("concat", format!("axis {axis} out of range for {base:?}"));
        }
        let mut widths = Vec::with_capacity(inputs.len());
        for &v in inputs {
            let s = self.shape(v);
            let compatible = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(k, (a, b))| k == axis || a == b);
            if !compatible {
                return shape_err("concat", &base, s);
            }
            widths.push(s[axis]);
        }
        let (outer, _, inner) = split_axis(&base, axis);
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (&v, &w) in inputs.iter().zip(&widths) {
                let data = self.value(v).data();
                out.extend_from_slice(&data[o * w * inner..(o + 1) * w * inner]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let value = Tensor::new(&shape, out)?;
        self.push(
            "concat",
            value,
            Op::Concat {
                inputs: inputs.to_vec(),
                outer,
                widths,
                inner,
            },
            inputs,
        )
    }

    /// Arithmetic mean along `axis`, which is removed from the shape.
    pub fn mean(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return arg_err("mean", format!("axis {axis} out of range for {shape:?}"));
        }
        let (outer, len, inner) = split_axis(&shape, axis);
        if len == 0 {
            return arg_err("mean", "empty axis");
        }
        let xv = self.value(x).data();
        let mut out = vec![T::zero(); outer * inner];
        for o in 0..outer {
            for l in 0..len {
                let src = &xv[(o * len + l) * inner..(o * len + l + 1) * inner];
                for (acc, &v) in out[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                    *acc += v;
                }
            }
        }
        let inv = T::one() / T::lit(len as f64);
        out.iter_mut().for_each(|v| *v *= inv);
        let mut new_shape = shape;
        new_shape.remove(axis);
        let value = Tensor::new(&new_shape, out)?;
        self.push("mean", value, Op::Mean { x, outer, len, inner }, &[x])
    }

    pub fn sum_all(&mut self, x: Var) -> Result<Var> {
        let total: T = self.value(x).data().iter().copied().sum();
        self.push("sum_all", Tensor::scalar(total), Op::SumAll(x), &[x])
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).clone().reshaped(shape)?;
        self.push("reshape", value, Op::Reshape(x), &[x])
    }

    /// Batch normalization over the last axis; statistics are taken over
    /// every other position. In train mode the running statistics of
    /// `state` are updated.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        state: &mut BatchNormState<T>,
        mode: BnMode,
    ) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let d = *shape.last().unwrap_or(&0);
        if d == 0 || self.shape(gamma) != [d] || self.shape(beta) != [d] || state.dim() != d {
            return shape_err("batch_norm", &shape, self.shape(gamma));
        }
        let xv = self.value(x).data();
        let rows = xv.len() / d;
        let (mean, inv_std) = match mode {
            BnMode::Train => {
                if rows < 2 {
                    return arg_err("batch_norm", "train mode needs at least 2 samples per feature");
                }
                let mut mean = vec![T::zero(); d];
                for row in xv.chunks_exact(d) {
                    for (m, &v) in mean.iter_mut().zip(row) {
                        *m += v;
                    }
                }
                let inv_rows = T::one() / T::lit(rows as f64);
                mean.iter_mut().for_each(|m| *m *= inv_rows);
                let mut var = vec![T::zero(); d];
                for row in xv.chunks_exact(d) {
                    for c in 0..d {
                        let dev = row[c] - mean[c];
                        var[c] += dev * dev;
                    }
                }
                var.iter_mut().for_each(|v| *v *= inv_rows);
                let inv_std = var.iter().map(|&v| T::one() / (v + state.eps).sqrt()).collect();
                state.update(&mean, &var, rows);
                (mean, inv_std)
            }
            BnMode::Infer => (
                state.running_mean.clone(),
                state
                    .running_var
                    .iter()
                    .map(|&v| T::one() / (v + state.eps).sqrt())
                    .collect::<Vec<_>>(),
            ),
        };
        let g = self.value(gamma).data();
        let b = self.value(beta).data();
        let mut xhat = vec![T::zero(); xv.len()];
        let mut out = vec![T::zero(); xv.len()];
        for ((row, hrow), orow) in xv
            .chunks_exact(d)
            .zip(xhat.chunks_exact_mut(d))
            .zip(out.chunks_exact_mut(d))
        {
            for c in 0..d {
                let h = (row[c] - mean[c]) * inv_std[c];
                hrow[c] = h;
                orow[c] = g[c] * h + b[c];
            }
        }
        let value = Tensor::new(&shape, out)?;
        self.push(
            "batch_norm",
            value,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                groups: 1,
                train: mode == BnMode::Train,
            },
            &[x, gamma, beta],
        )
    }

    /// Normalization with batch-norm arithmetic but separate statistics for
    /// each of `groups` equal slices along the leading axis (biased
    /// variance, epsilon `eps`). No running state is involved, so training
    /// and evaluation compute the same function.
    pub fn group_batch_norm(&mut self, x: Var, gamma: Var, beta: Var, groups: usize, eps: T) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let d = *shape.last().unwrap_or(&0);
        if d == 0 || self.shape(gamma) != [d] || self.shape(beta) != [d] {
            return shape_err("group_batch_norm", &shape, self.shape(gamma));
        }
        if groups == 0 || shape.first() != Some(&groups) {
            return arg_err("group_batch_norm", format!("{groups} groups for shape {shape:?}"));
        }
        let xv = self.value(x).data();
        let rows = xv.len() / d / groups;
        if rows < 2 {
            return arg_err("group_batch_norm", "each group needs at least 2 samples per feature");
        }
        let g = self.value(gamma).data();
        let b = self.value(beta).data();
        let inv_rows = T::one() / T::lit(rows as f64);
        let mut xhat = vec![T::zero(); xv.len()];
        let mut out = vec![T::zero(); xv.len()];
        let mut inv_std = vec![T::zero(); groups * d];
        let span = rows * d;
        for k in 0..groups {
            let xs = &xv[k * span..(k + 1) * span];
            let mut mean = vec![T::zero(); d];
            for row in xs.chunks_exact(d) {
                for (m, &v) in mean.iter_mut().zip(row) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m *= inv_rows);
            let mut var = vec![T::zero(); d];
            for row in xs.chunks_exact(d) {
                for c in 0..d {
                    let dev = row[c] - mean[c];
                    var[c] += dev * dev;
                }
            }
            let istd = &mut inv_std[k * d..(k + 1) * d];
            for c in 0..d {
                istd[c] = T::one() / (var[c] * inv_rows + eps).sqrt();
            }
            for ((row, hrow), orow) in xs
                .chunks_exact(d)
                .zip(xhat[k * span..(k + 1) * span].chunks_exact_mut(d))
                .zip(out[k * span..(k + 1) * span].chunks_exact_mut(d))
            {
                for c in 0..d {
                    let h = (row[c] - mean[c]) * istd[c];
                    hrow[c] = h;
                    orow[c] = g[c] * h + b[c];
                }
            }
        }
        let value = Tensor::new(&shape, out)?;
        self.push(
            "group_batch_norm",
            value,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                groups,
                train: true,
            },
            &[x, gamma, beta],
        )
    }

    /// `out[b, i, j] = base[b, i, j] + a[b, i] + c[b, j]` for node tensors
    /// `a`, `c` of shape `[B, n, d]` and an optional edge tensor `base` of
    /// shape `[B, n, n, d]`.
    pub fn pair_sum(&mut self, base: Option<Var>, a: Var, c: Var) -> Result<Var> {
        let s = self.shape(a).to_vec();
        if s.len() != 3 || self.shape(c) != s.as_slice() {
            return shape_err("pair_sum", &s, self.shape(c));
        }
        let (batch, n, d) = (s[0], s[1], s[2]);
        if let Some(e) = base {
            if self.shape(e) != [batch, n, n, d] {
                return shape_err("pair_sum(base)", self.shape(e), &[batch, n, n, d]);
            }
        }
        let av = self.value(a).data();
        let cv = self.value(c).data();
        let mut out = match base {
            Some(e) => self.value(e).data().to_vec(),
            None => vec![T::zero(); batch * n * n * d],
        };
        for b in 0..batch {
            for i in 0..n {
                let ai = &av[(b * n + i) * d..(b * n + i + 1) * d];
                for j in 0..n {
                    let cj = &cv[(b * n + j) * d..(b * n + j + 1) * d];
                    let o = &mut out[((b * n + i) * n + j) * d..((b * n + i) * n + j + 1) * d];
                    for k in 0..d {
                        o[k] += ai[k] + cj[k];
                    }
                }
            }
        }
        let value = Tensor::new(&[batch, n, n, d], out)?;
        let mut inputs = vec![a, c];
        inputs.extend(base);
        self.push(
            "pair_sum",
            value,
            Op::PairSum {
                base,
                a,
                c,
                batch,
                n,
                d,
            },
            &inputs,
        )
    }

    /// `out[b, i] = sum_{j != i} gate[b, i, j] * v[b, j]` with `gate` of
    /// shape `[B, n, n, d]` and `v` of shape `[B, n, d]`.
    pub fn gated_neighbor_sum(&mut self, gate: Var, v: Var) -> Result<Var> {
        let s = self.shape(v).to_vec();
        if s.len() != 3 || self.shape(gate) != [s[0], s[1], s[1], s[2]] {
            return shape_err("gated_neighbor_sum", self.shape(gate), &s);
        }
        let (batch, n, d) = (s[0], s[1], s[2]);
        let gv = self.value(gate).data();
        let vv = self.value(v).data();
        let mut out = vec![T::zero(); batch * n * d];
        for b in 0..batch {
            for i in 0..n {
                let o = &mut out[(b * n + i) * d..(b * n + i + 1) * d];
                for j in (0..n).filter(|&j| j != i) {
                    let g = &gv[((b * n + i) * n + j) * d..((b * n + i) * n + j + 1) * d];
                    let vj = &vv[(b * n + j) * d..(b * n + j + 1) * d];
                    for k in 0..d {
                        o[k] += g[k] * vj[k];
                    }
                }
            }
        }
        let value = Tensor::new(&[batch, n, d], out)?;
        self.push(
            "gated_neighbor_sum",
            value,
            Op::GatedNeighborSum { gate, v, batch, n, d },
            &[gate, v],
        )
    }

    /// `out[b] = sum_i w[b, i] * h[b, i]` for `h` of shape `[B, n, d]` and
    /// constant weights `w` of length `B * n`.
    pub fn weighted_node_sum(&mut self, h: Var, w: &[T]) -> Result<Var> {
        let s = self.shape(h).to_vec();
        if s.len() != 3 || w.len() != s[0] * s[1] {
            return shape_err("weighted_node_sum", &s, &[w.len()]);
        }
        let (batch, n, d) = (s[0], s[1], s[2]);
        let hv = self.value(h).data();
        let mut out = vec![T::zero(); batch * d];
        for b in 0..batch {
            let o = &mut out[b * d..(b + 1) * d];
            for i in 0..n {
                let wi = w[b * n + i];
                if wi == T::zero() {
                    continue;
                }
                for (acc, &x) in o.iter_mut().zip(&hv[(b * n + i) * d..(b * n + i + 1) * d]) {
                    *acc += wi * x;
                }
            }
        }
        let value = Tensor::new(&[batch, d], out)?;
        self.push(
            "weighted_node_sum",
            value,
            Op::WeightedNodeSum {
                h,
                w: w.to_vec(),
                batch,
                n,
                d,
            },
            &[h],
        )
    }

    /// Per-head dot products between one query per batch entry (`[B, d]`)
    /// and `n` keys (`[B, n, d]`); head `h` uses features
    /// `h*d/heads .. (h+1)*d/heads`. Output `[B, heads, n]`.
    pub fn attn_scores(&mut self, q: Var, k: Var, heads: usize) -> Result<Var> {
        let ks = self.shape(k).to_vec();
        if ks.len() != 3 || self.shape(q) != [ks[0], ks[2]] {
            return shape_err("attn_scores", self.shape(q), &ks);
        }
        let (batch, n, d) = (ks[0], ks[1], ks[2]);
        if heads == 0 || d % heads != 0 {
            return arg_err("attn_scores", format!("{heads} heads do not divide width {d}"));
        }
        let hd = d / heads;
        let qv = self.value(q).data();
        let kv = self.value(k).data();
        let mut out = vec![T::zero(); batch * heads * n];
        for b in 0..batch {
            for h in 0..heads {
                let qh = &qv[b * d + h * hd..b * d + (h + 1) * hd];
                for j in 0..n {
                    let kj = &kv[(b * n + j) * d + h * hd..(b * n + j) * d + (h + 1) * hd];
                    out[(b * heads + h) * n + j] = qh.iter().zip(kj).map(|(&x, &y)| x * y).sum();
                }
            }
        }
        let value = Tensor::new(&[batch, heads, n], out)?;
        self.push(
            "attn_scores",
            value,
            Op::AttnScores {
                q,
                k,
                batch,
                n,
                d,
                heads,
            },
            &[q, k],
        )
    }

    /// Attention-weighted values: `out[b, c] = sum_j a[b, head(c), j] *
    /// v[b, j, c]` for weights `[B, heads, n]` and values `[B, n, d]`.
    pub fn attn_combine(&mut self, a: Var, v: Var, heads: usize) -> Result<Var> {
        let vs = self.shape(v).to_vec();
        if vs.len() != 3 || self.shape(a) != [vs[0], heads, vs[1]] {
            return shape_err("attn_combine", self.shape(a), &vs);
        }
        let (batch, n, d) = (vs[0], vs[1], vs[2]);
        if heads == 0 || d % heads != 0 {
            return arg_err("attn_combine", format!("{heads} heads do not divide width {d}"));
        }
        let hd = d / heads;
        let av = self.value(a).data();
        let vv = self.value(v).data();
        let mut out = vec![T::zero(); batch * d];
        for b in 0..batch {
            for h in 0..heads {
                let o = &mut out[b * d + h * hd..b * d + (h + 1) * hd];
                for j in 0..n {
                    let w = av[(b * heads + h) * n + j];
                    let vj = &vv[(b * n + j) * d + h * hd..(b * n + j) * d + (h + 1) * hd];
                    for (acc, &x) in o.iter_mut().zip(vj) {
                        *acc += w * x;
                    }
                }
            }
        }
        let value = Tensor::new(&[batch, d], out)?;
        self.push(
            "attn_combine",
            value,
            Op::AttnCombine {
                a,
                v,
                batch,
                n,
                d,
                heads,
            },
            &[a, v],
        )
    }

    /// Log-probability of `actions[b]` under the masked softmax of row `b`
    /// of `logits` (`[B, n]`, mask `true` = allowed). Output `[B]`.
    pub fn select_log_prob(&mut self, logits: Var, mask: &[bool], actions: &[usize]) -> Result<Var> {
        let s = self.shape(logits).to_vec();
        if s.len() != 2 || mask.len() != s[0] * s[1] || actions.len() != s[0] {
            return shape_err("select_log_prob", &s, &[mask.len(), actions.len()]);
        }
        let (batch, n) = (s[0], s[1]);
        let lv = self.value(logits).data();
        let mut probs = vec![T::zero(); batch * n];
        let mut out = vec![T::zero(); batch];
        for b in 0..batch {
            let a = actions[b];
            if a >= n || !mask[b * n + a] {
                return arg_err("select_log_prob", format!("action {a} is not allowed in row {b}"));
            }
            let row = &lv[b * n..(b + 1) * n];
            let m = &mask[b * n..(b + 1) * n];
            let max = row
                .iter()
                .zip(m)
                .filter(|(_, &ok)| ok)
                .map(|(&v, _)| v)
                .fold(T::neg_infinity(), T::max);
            let mut total = T::zero();
            for j in 0..n {
                if m[j] {
                    let e = (row[j] - max).exp();
                    probs[b * n + j] = e;
                    total += e;
                }
            }
            for p in &mut probs[b * n..(b + 1) * n] {
                *p /= total;
            }
            out[b] = row[a] - max - total.ln();
        }
        let value = Tensor::new(&[batch], out)?;
        self.push(
            "select_log_prob",
            value,
            Op::SelectLogProb {
                logits,
                probs,
                actions: actions.to_vec(),
                n,
            },
            &[logits],
        )
    }

    /// `sum_i w[i] * x[i]` with constant weights; scalar output.
    pub fn weighted_sum(&mut self, x: Var, w: &[T]) -> Result<Var> {
        if w.len() != self.value(x).numel() {
            return shape_err("weighted_sum", self.shape(x), &[w.len()]);
        }
        let total = self.value(x).data().iter().zip(w).map(|(&a, &b)| a * b).sum();
        self.push(
            "weighted_sum",
            Tensor::scalar(total),
            Op::WeightedSum { x, w: w.to_vec() },
            &[x],
        )
    }
}
