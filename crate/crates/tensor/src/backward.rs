use crate::error::{arg_err, Result};
use crate::graph::{Graph, Node, Op, Var};
use crate::param::ParamStore;
use crate::scalar::Scalar;

/// Gradients of a scalar root with respect to tracked leaves and parameters.
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of a tracked leaf or parameter node, or `None` if the node
    /// does not influence the root (or is not a leaf).
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

fn slot<'a, T: Scalar>(
    grads: &'a mut [Option<Vec<T>>],
    nodes: &[Node<T>],
    v: Var,
) -> Option<&'a mut [T]> {
    if !nodes[v.0].requires_grad {
        return None;
    }
    let len = nodes[v.0].value.numel();
    Some(grads[v.0].get_or_insert_with(|| vec![T::zero(); len]).as_mut_slice())
}

impl<T: Scalar> Graph<T> {
    /// Reverse-mode sweep from a single-element `root`.
    pub fn backward(&self, root: Var) -> Result<Gradients<T>> {
        if self.value(root).numel() != 1 {
            return arg_err(
                "backward",
                format!("root must hold one element, has shape {:?}", self.shape(root)),
            );
        }
        let nodes = &self.nodes;
        let mut grads: Vec<Option<Vec<T>>> = (0..nodes.len()).map(|_| None).collect();
        if nodes[root.0].requires_grad {
            grads[root.0] = Some(vec![T::one()]);
        }
        for idx in (0..=root.0).rev() {
            let node = &nodes[idx];
            if matches!(node.op, Op::Leaf | Op::Param(_)) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let out = node.value.data();
            match &node.op {
                Op::Leaf | Op::Param(_) => unreachable!(),
                Op::Linear { x, w, b } => {
                    let k = self.shape(*w)[0];
                    let m = self.shape(*w)[1];
                    let rows = g.len() / m.max(1);
                    if let Some(dx) = slot(&mut grads, nodes, *x) {
                        T::gemm(rows, m, k, T::one(), &g, m, 1, self.value(*w).data(), 1, m, T::one(), dx);
                    }
                    if let Some(dw) = slot(&mut grads, nodes, *w) {
                        T::gemm(k, rows, m, T::one(), self.value(*x).data(), 1, k, &g, m, 1, T::one(), dw);
                    }
                    if let Some(b) = b {
                        if let Some(db) = slot(&mut grads, nodes, *b) {
                            for row in g.chunks_exact(m) {
                                for (acc, &v) in db.iter_mut().zip(row) {
                                    *acc += v;
                                }
                            }
                        }
                    }
                }
                Op::MatMul { a, b } => {
                    let (r, k) = (self.shape(*a)[0], self.shape(*a)[1]);
                    let m = self.shape(*b)[1];
                    if let Some(da) = slot(&mut grads, nodes, *a) {
                        T::gemm(r, m, k, T::one(), &g, m, 1, self.value(*b).data(), 1, m, T::one(), da);
                    }
                    if let Some(db) = slot(&mut grads, nodes, *b) {
                        T::gemm(k, r, m, T::one(), self.value(*a).data(), 1, k, &g, m, 1, T::one(), db);
                    }
                }
                Op::Add(a, b) | Op::Sub(a, b) => {
                    let sign = if matches!(node.op, Op::Sub(..)) { -T::one() } else { T::one() };
                    if let Some(da) = slot(&mut grads, nodes, *a) {
                        da.iter_mut().zip(&g).for_each(|(d, &v)| *d += v);
                    }
                    if let Some(db) = slot(&mut grads, nodes, *b) {
                        db.iter_mut().zip(&g).for_each(|(d, &v)| *d += sign * v);
                    }
                }
                Op::Mul(a, b) => {
                    if let Some(da) = slot(&mut grads, nodes, *a) {
                        let bv = self.value(*b).data();
                        for ((d, &v), &o) in da.iter_mut().zip(&g).zip(bv) {
                            *d += v * o;
                        }
                    }
                    if let Some(db) = slot(&mut grads, nodes, *b) {
                        let av = self.value(*a).data();
                        for ((d, &v), &o) in db.iter_mut().zip(&g).zip(av) {
                            *d += v * o;
                        }
                    }
                }
                Op::Scale(a, c) => {
                    if let Some(da) = slot(&mut grads, nodes, *a) {
                        da.iter_mut().zip(&g).for_each(|(d, &v)| *d += v * *c);
                    }
                }
                Op::Relu(a) => {
                    if let Some(da) = slot(&mut grads, nodes, *a) {
                        for ((d, &v), &y) in da.iter_mut().zip(&g).zip(out) {
                            if y > T::zero() {
                                *d += v;
                            }
                        }
                    }
                }
                Op::Sigmoid(a) => {
                    if let Some(da) = slot(&mut grads, nodes, *a) {
                        for ((d, &v), &y) in da.iter_mut().zip(&g).zip(out) {
                            *d += v * y * (T::one() - y);
                        }
                    }
                }
                Op::Tanh(a) => {
                    if let Some(da) = slot(&mut grads, nodes, *a) {
                        for ((d, &v), &y) in da.iter_mut().zip(&g).zip(out) {
                            *d += v * (T::one() - y * y);
                        }
                    }
                }
                Op::Softmax { x, outer, len, inner } => {
                    if let Some(dx) = slot(&mut grads, nodes, *x) {
                        for o in 0..*outer {
                            for i in 0..*inner {
                                let at = |l: usize| (o * len + l) * inner + i;
                                let s: T = (0..*len).map(|l| g[at(l)] * out[at(l)]).sum();
                                for l in 0..*len {
                                    dx[at(l)] += out[at(l)] * (g[at(l)] - s);
                                }
                            }
                        }
                    }
                }
                Op::Concat {
                    inputs,
                    outer,
                    widths,
                    inner,
                } => {
                    let total: usize = widths.iter().sum();
                    let mut offset = 0;
                    for (&v, &w) in inputs.iter().zip(widths) {
                        if let Some(dv) = slot(&mut grads, nodes, v) {
                            for o in 0..*outer {
                                let src = &g[(o * total + offset) * inner..(o * total + offset + w) * inner];
                                let dst = &mut dv[o * w * inner..(o + 1) * w * inner];
                                dst.iter_mut().zip(src).for_each(|(d, &s)| *d += s);
                            }
                        }
                        offset += w;
                    }
                }
                Op::Mean { x, outer, len, inner } => {
                    if let Some(dx) = slot(&mut grads, nodes, *x) {
                        let inv = T::one() / T::lit(*len as f64);
                        for o in 0..*outer {
                            let src = &g[o * inner..(o + 1) * inner];
                            for l in 0..*len {
                                let dst = &mut dx[(o * len + l) * inner..(o * len + l + 1) * inner];
                                dst.iter_mut().zip(src).for_each(|(d, &s)| *d += s * inv);
                            }
                        }
                    }
                }
                Op::SumAll(x) => {
                    if let Some(dx) = slot(&mut grads, nodes, *x) {
                        dx.iter_mut().for_each(|d| *d += g[0]);
                    }
                }
                Op::Reshape(x) => {
                    if let Some(dx) = slot(&mut grads, nodes, *x) {
                        dx.iter_mut().zip(&g).for_each(|(d, &v)| *d += v);
                    }
                }
                Op::BatchNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                    groups,
                    train,
                } => {
                    let d = inv_std.len() / groups;
                    let span = g.len() / groups;
                    let rows = span / d;
                    let inv_rows = T::one() / T::lit(rows as f64);
                    let gm = self.value(*gamma).data().to_vec();
                    let mut sum_g = vec![T::zero(); groups * d];
                    let mut sum_gx = vec![T::zero(); groups * d];
                    for k in 0..*groups {
                        let (sg, sgx) = (&mut sum_g[k * d..(k + 1) * d], &mut sum_gx[k * d..(k + 1) * d]);
                        for (grow, hrow) in g[k * span..(k + 1) * span]
                            .chunks_exact(d)
                            .zip(xhat[k * span..(k + 1) * span].chunks_exact(d))
                        {
                            for c in 0..d {
                                sg[c] += grow[c];
                                sgx[c] += grow[c] * hrow[c];
                            }
                        }
                    }
                    if let Some(dg) = slot(&mut grads, nodes, *gamma) {
                        for chunk in sum_gx.chunks_exact(d) {
                            dg.iter_mut().zip(chunk).for_each(|(a, &v)| *a += v);
                        }
                    }
                    if let Some(db) = slot(&mut grads, nodes, *beta) {
                        for chunk in sum_g.chunks_exact(d) {
                            db.iter_mut().zip(chunk).for_each(|(a, &v)| *a += v);
                        }
                    }
                    if let Some(dx) = slot(&mut grads, nodes, *x) {
                        for k in 0..*groups {
                            let istd = &inv_std[k * d..(k + 1) * d];
                            let (sg, sgx) = (&sum_g[k * d..(k + 1) * d], &sum_gx[k * d..(k + 1) * d]);
                            for ((drow, grow), hrow) in dx[k * span..(k + 1) * span]
                                .chunks_exact_mut(d)
                                .zip(g[k * span..(k + 1) * span].chunks_exact(d))
                                .zip(xhat[k * span..(k + 1) * span].chunks_exact(d))
                            {
                                for c in 0..d {
                                    let scale = gm[c] * istd[c];
                                    drow[c] += if *train {
                                        scale * (grow[c] - (sg[c] + hrow[c] * sgx[c]) * inv_rows)
                                    } else {
                                        scale * grow[c]
                                    };
                                }
                            }
                        }
                    }
                }
                Op::PairSum {
                    base,
                    a,
                    c,
                    batch,
                    n,
                    d,
                } => {
                    let (batch, n, d) = (*batch, *n, *d);
                    if let Some(e) = base {
                        if let Some(de) = slot(&mut grads, nodes, *e) {
                            de.iter_mut().zip(&g).for_each(|(x, &v)| *x += v);
                        }
                    }
                    if let Some(da) = slot(&mut grads, nodes, *a) {
                        for b in 0..batch {
                            for i in 0..n {
                                let dst = &mut da[(b * n + i) * d..(b * n + i + 1) * d];
                                for j in 0..n {
                                    let src = &g[((b * n + i) * n + j) * d..((b * n + i) * n + j + 1) * d];
                                    dst.iter_mut().zip(src).for_each(|(x, &v)| *x += v);
                                }
                            }
                        }
                    }
                    if let Some(dc) = slot(&mut grads, nodes, *c) {
                        for b in 0..batch {
                            for i in 0..n {
                                for j in 0..n {
                                    let src = &g[((b * n + i) * n + j) * d..((b * n + i) * n + j + 1) * d];
                                    let dst = &mut dc[(b * n + j) * d..(b * n + j + 1) * d];
                                    dst.iter_mut().zip(src).for_each(|(x, &v)| *x += v);
                                }
                            }
                        }
                    }
                }
                Op::GatedNeighborSum { gate, v, batch, n, d } => {
                    let (batch, n, d) = (*batch, *n, *d);
                    if let Some(dg) = slot(&mut grads, nodes, *gate) {
                        let vv = self.value(*v).data();
                        for b in 0..batch {
                            for i in 0..n {
                                let gi = &g[(b * n + i) * d..(b * n + i + 1) * d];
                                for j in (0..n).filter(|&j| j != i) {
                                    let vj = &vv[(b * n + j) * d..(b * n + j + 1) * d];
                                    let dst = &mut dg[((b * n + i) * n + j) * d..((b * n + i) * n + j + 1) * d];
                                    for k in 0..d {
                                        dst[k] += gi[k] * vj[k];
                                    }
                                }
                            }
                        }
                    }
                    if let Some(dv) = slot(&mut grads, nodes, *v) {
                        let gv = self.value(*gate).data();
                        for b in 0..batch {
                            for i in 0..n {
                                let gi = &g[(b * n + i) * d..(b * n + i + 1) * d];
                                for j in (0..n).filter(|&j| j != i) {
                                    let gate_ij = &gv[((b * n + i) * n + j) * d..((b * n + i) * n + j + 1) * d];
                                    let dst = &mut dv[(b * n + j) * d..(b * n + j + 1) * d];
                                    for k in 0..d {
                                        dst[k] += gi[k] * gate_ij[k];
                                    }
                                }
                            }
                        }
                    }
                }
                Op::WeightedNodeSum { h, w, batch, n, d } => {
                    let (batch, n, d) = (*batch, *n, *d);
                    if let Some(dh) = slot(&mut grads, nodes, *h) {
                        for b in 0..batch {
                            let src = &g[b * d..(b + 1) * d];
                            for i in 0..n {
                                let wi = w[b * n + i];
                                let dst = &mut dh[(b * n + i) * d..(b * n + i + 1) * d];
                                dst.iter_mut().zip(src).for_each(|(x, &v)| *x += wi * v);
                            }
                        }
                    }
                }
                Op::AttnScores {
                    q,
                    k,
                    batch,
                    n,
                    d,
                    heads,
                } => {
                    let (batch, n, d, heads) = (*batch, *n, *d, *heads);
                    let hd = d / heads;
                    let qv = self.value(*q).data();
                    let kv = self.value(*k).data();
                    if let Some(dq) = slot(&mut grads, nodes, *q) {
                        for b in 0..batch {
                            for h in 0..heads {
                                let dst = &mut dq[b * d + h * hd..b * d + (h + 1) * hd];
                                for j in 0..n {
                                    let s = g[(b * heads + h) * n + j];
                                    let kj = &kv[(b * n + j) * d + h * hd..(b * n + j) * d + (h + 1) * hd];
                                    dst.iter_mut().zip(kj).for_each(|(x, &v)| *x += s * v);
                                }
                            }
                        }
                    }
                    if let Some(dk) = slot(&mut grads, nodes, *k) {
                        for b in 0..batch {
                            for h in 0..heads {
                                let qh = &qv[b * d + h * hd..b * d + (h + 1) * hd];
                                for j in 0..n {
                                    let s = g[(b * heads + h) * n + j];
                                    let dst = &mut dk[(b * n + j) * d + h * hd..(b * n + j) * d + (h + 1) * hd];
                                    dst.iter_mut().zip(qh).for_each(|(x, &v)| *x += s * v);
                                }
                            }
                        }
                    }
                }
                Op::AttnCombine {
                    a,
                    v,
                    batch,
                    n,
                    d,
                    heads,
                } => {
                    let (batch, n, d, heads) = (*batch, *n, *d, *heads);
                    let hd = d / heads;
                    let av = self.value(*a).data();
                    let vv = self.value(*v).data();
                    if let Some(da) = slot(&mut grads, nodes, *a) {
                        for b in 0..batch {
                            for h in 0..heads {
                                let gh = &g[b * d + h * hd..b * d + (h + 1) * hd];
                                for j in 0..n {
                                    let vj = &vv[(b * n + j) * d + h * hd..(b * n + j) * d + (h + 1) * hd];
                                    da[(b * heads + h) * n + j] += gh.iter().zip(vj).map(|(&x, &y)| x * y).sum();
                                }
                            }
                        }
                    }
                    if let Some(dv) = slot(&mut grads, nodes, *v) {
                        for b in 0..batch {
                            for h in 0..heads {
                                let gh = &g[b * d + h * hd..b * d + (h + 1) * hd];
                                for j in 0..n {
                                    let w = av[(b * heads + h) * n + j];
                                    let dst = &mut dv[(b * n + j) * d + h * hd..(b * n + j) * d + (h + 1) * hd];
                                    dst.iter_mut().zip(gh).for_each(|(x, &y)| *x += w * y);
                                }
                            }
                        }
                    }
                }
                Op::SelectLogProb {
                    logits,
                    probs,
                    actions,
                    n,
                } => {
                    if let Some(dl) = slot(&mut grads, nodes, *logits) {
                        for (b, &a) in actions.iter().enumerate() {
                            let row = &mut dl[b * n..(b + 1) * n];
                            for (j, x) in row.iter_mut().enumerate() {
                                *x -= g[b] * probs[b * n + j];
                            }
                            row[a] += g[b];
                        }
                    }
                }
                Op::WeightedSum { x, w } => {
                    if let Some(dx) = slot(&mut grads, nodes, *x) {
                        dx.iter_mut().zip(w).for_each(|(d, &wi)| *d += g[0] * wi);
                    }
                }
            }
        }
        for (idx, node) in nodes.iter().enumerate() {
            if !matches!(node.op, Op::Leaf | Op::Param(_)) {
                grads[idx] = None;
            }
        }
        Ok(Gradients { grads })
    }

    /// Adds the parameter gradients of `grads` to the accumulators of
    /// `store`.
    pub fn accumulate(&self, grads: &Gradients<T>, store: &mut ParamStore<T>) {
        for (idx, node) in self.nodes.iter().enumerate() {
            if let Op::Param(id) = node.op {
                if let Some(g) = grads.get(Var(idx)) {
                    let p = store.get_mut(id);
                    p.grad.iter_mut().zip(g).for_each(|(a, &v)| *a += v);
                }
            }
        }
    }

    /// [`Graph::backward`] followed by [`Graph::accumulate`].
    pub fn backward_into(&self, root: Var, store: &mut ParamStore<T>) -> Result<()> {
        let grads = self.backward(root)?;
        self.accumulate(&grads, store);
        Ok(())
    }
}
