use lop_core::{EdgeFeatures, LopInstance, Rng};
use lop_tensor::{BatchNormState, BnMode, Graph, ParamId, ParamStore, Scalar, Tensor, Var};

use crate::config::{ModelConfig, NormStats};

const INSTANCE_NORM_EPS: f64 = 1e-5;
use crate::error::{ModelError, Result};
use crate::state::{featurize, DecoderState, NodeStateFeatures};

#[derive(Debug, Clone)]
pub(crate) struct LayerIds {
    pub w: [ParamId; 5],
    pub node_gamma: ParamId,
    pub node_beta: ParamId,
    pub edge_gamma: ParamId,
    pub edge_beta: ParamId,
}

#[derive(Debug, Clone)]
pub(crate) struct ParamIds {
    pub node_w: ParamId,
    pub node_b: ParamId,
    pub edge_w: ParamId,
    pub edge_b: ParamId,
    pub layers: Vec<LayerIds>,
    pub context: ParamId,
    pub mha: [ParamId; 4],
    pub logit_q: ParamId,
    pub logit_k: ParamId,
}

impl ParamIds {
    fn resolve<T: Scalar>(store: &ParamStore<T>, layers: usize) -> Result<Self> {
        let id = |name: &str| {
            store
                .id(name)
                .ok_or_else(|| ModelError::Incompatible(format!("missing parameter `{name}`")))
        };
        let layers = (0..layers)
            .map(|l| {
                let p = format!("enc.layer{l}");
                Ok(LayerIds {
                    w: [
                        id(&format!("{p}.w1"))?,
                        id(&format!("{p}.w2"))?,
                        id(&format!("{p}.w3"))?,
                        id(&format!("{p}.w4"))?,
                        id(&format!("{p}.w5"))?,
                    ],
                    node_gamma: id(&format!("{p}.bn_node.gamma"))?,
                    node_beta: id(&format!("{p}.bn_node.beta"))?,
                    edge_gamma: id(&format!("{p}.bn_edge.gamma"))?,
                    edge_beta: id(&format!("{p}.bn_edge.beta"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            node_w: id("embed.node.weight")?,
            node_b: id("embed.node.bias")?,
            edge_w: id("embed.edge.weight")?,
            edge_b: id("embed.edge.bias")?,
            layers,
            context: id("dec.context.weight")?,
            mha: [
                id("dec.mha.wq")?,
                id("dec.mha.wk")?,
                id("dec.mha.wv")?,
                id("dec.mha.wo")?,
            ],
            logit_q: id("dec.logit.wq")?,
            logit_k: id("dec.logit.wk")?,
        })
    }
}

/// Batch-normalization running statistics of one encoder layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorms<T> {
    pub node: BatchNormState<T>,
    pub edge: BatchNormState<T>,
}

pub(crate) struct BoundLayer {
    w: [Var; 5],
    node_gamma: Var,
    node_beta: Var,
    edge_gamma: Var,
    edge_beta: Var,
}

/// Parameters recorded on one graph.
pub(crate) struct Bound {
    node_w: Var,
    node_b: Var,
    edge_w: Var,
    edge_b: Var,
    layers: Vec<BoundLayer>,
    context: Var,
    mha: [Var; 4],
    logit_q: Var,
    logit_k: Var,
}

/// State-independent edge terms shared by every decoding step.
pub(crate) struct EdgeCache {
    e1: Var,
    gate1: Var,
    w3e1: Option<Var>,
}

pub(crate) enum Norms<'a, T> {
    Infer(&'a [LayerNorms<T>]),
    Train(&'a mut [LayerNorms<T>]),
}

impl<T: Scalar> Norms<'_, T> {
    #[allow(clippy::too_many_arguments)]
    fn apply(
        &mut self,
        g: &mut Graph<T>,
        stats: NormStats,
        x: Var,
        gamma: Var,
        beta: Var,
        layer: usize,
        edge: bool,
    ) -> Result<Var> {
        if stats == NormStats::Instance {
            let groups = g.shape(x)[0];
            return Ok(g.group_batch_norm(x, gamma, beta, groups, T::lit(INSTANCE_NORM_EPS))?);
        }
        let pick = |n: &LayerNorms<T>| if edge { n.edge.clone() } else { n.node.clone() };
        Ok(match self {
            Norms::Infer(norms) => {
                let mut st = pick(&norms[layer]);
                g.batch_norm(x, gamma, beta, &mut st, BnMode::Infer)?
            }
            Norms::Train(norms) => {
                let st = if edge {
                    &mut norms[layer].edge
                } else {
                    &mut norms[layer].node
                };
                g.batch_norm(x, gamma, beta, st, BnMode::Train)?
            }
        })
    }
}

/// The policy network: parameters plus batch-normalization statistics.
#[derive(Debug, Clone)]
pub struct Model<T: Scalar = f32> {
    pub(crate) config: ModelConfig,
    pub(crate) params: ParamStore<T>,
    pub(crate) ids: ParamIds,
    pub(crate) norms: Vec<LayerNorms<T>>,
}

impl<T: Scalar> Model<T> {
    /// Fresh model. Weights and the embedding biases are drawn uniformly
    /// from `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`; batch-norm shifts start at
    /// zero and scales at one. A nonzero node bias matters: on the empty
    /// solution every node has the same features, and with a zero bias the
    /// edge gates would have nothing to modulate.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let d = config.d;
        let mut rng = Rng::new(seed);
        let mut u = || rng.uniform_f64();
        let mut s = ParamStore::new();
        let bound = |fan_in: usize| 1.0 / (fan_in as f64).sqrt();
        s.add_uniform("embed.node.weight", &[2, d], bound(2), &mut u)?;
        s.add_uniform("embed.node.bias", &[d], bound(2), &mut u)?;
        s.add_uniform("embed.edge.weight", &[1, d], bound(1), &mut u)?;
        s.add_uniform("embed.edge.bias", &[d], bound(1), &mut u)?;
        for l in 0..config.layers {
            for k in 1..=5 {
                s.add_uniform(format!("enc.layer{l}.w{k}"), &[d, d], bound(d), &mut u)?;
            }
            for bn in ["bn_node", "bn_edge"] {
                s.add(format!("enc.layer{l}.{bn}.gamma"), Tensor::full(&[d], T::one()))?;
                s.add(format!("enc.layer{l}.{bn}.beta"), Tensor::zeros(&[d]))?;
            }
        }
        s.add_uniform("dec.context.weight", &[2 * d, d], bound(2 * d), &mut u)?;
        for w in ["wq", "wk", "wv", "wo"] {
            s.add_uniform(format!("dec.mha.{w}"), &[d, d], bound(d), &mut u)?;
        }
        s.add_uniform("dec.logit.wq", &[d, d], bound(d), &mut u)?;
        s.add_uniform("dec.logit.wk", &[d, d], bound(d), &mut u)?;
        Self::from_parts(config, s, None)
    }

    pub(crate) fn from_parts(
        config: ModelConfig,
        params: ParamStore<T>,
        norms: Option<Vec<LayerNorms<T>>>,
    ) -> Result<Self> {
        config.validate()?;
        let ids = ParamIds::resolve(&params, config.layers)?;
        let norms = norms.unwrap_or_else(|| {
            (0..config.layers)
                .map(|_| LayerNorms {
                    node: BatchNormState::new(config.d),
                    edge: BatchNormState::new(config.d),
                })
                .collect()
        });
        Ok(Self {
            config,
            params,
            ids,
            norms,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Switches between per-step and single encoding; parameters are shared.
    pub fn set_reencode_each_step(&mut self, on: bool) {
        self.config.reencode_each_step = on;
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn norms(&self) -> &[LayerNorms<T>] {
        &self.norms
    }

    pub fn norms_mut(&mut self) -> &mut [LayerNorms<T>] {
        &mut self.norms
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_scalars()
    }

    /// Same model in another precision.
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config,
            params: self.params.cast(),
            ids: self.ids.clone(),
            norms: self
                .norms
                .iter()
                .map(|n| LayerNorms {
                    node: n.node.cast(),
                    edge: n.edge.cast(),
                })
                .collect(),
        }
    }

    pub(crate) fn bind(&self, g: &mut Graph<T>) -> Bound {
        let p = &self.params;
        let ids = &self.ids;
        Bound {
            node_w: g.param(p, ids.node_w),
            node_b: g.param(p, ids.node_b),
            edge_w: g.param(p, ids.edge_w),
            edge_b: g.param(p, ids.edge_b),
            layers: ids
                .layers
                .iter()
                .map(|l| BoundLayer {
                    w: l.w.map(|w| g.param(p, w)),
                    node_gamma: g.param(p, l.node_gamma),
                    node_beta: g.param(p, l.node_beta),
                    edge_gamma: g.param(p, l.edge_gamma),
                    edge_beta: g.param(p, l.edge_beta),
                })
                .collect(),
            context: g.param(p, ids.context),
            mha: ids.mha.map(|w| g.param(p, w)),
            logit_q: g.param(p, ids.logit_q),
            logit_k: g.param(p, ids.logit_k),
        }
    }

    /// Edge embeddings `e1` of `y` (`[B, n, n, 1]`) and the terms of the
    /// first layer that depend on them only.
    pub(crate) fn edge_cache(&self, g: &mut Graph<T>, b: &Bound, y: Var, with_w3: bool) -> Result<EdgeCache> {
        let e1 = g.linear(y, b.edge_w, Some(b.edge_b))?;
        let gate1 = g.sigmoid(e1)?;
        let w3e1 = if with_w3 {
            Some(g.linear(e1, b.layers[0].w[2], None)?)
        } else {
            None
        };
        Ok(EdgeCache { e1, gate1, w3e1 })
    }

    pub(crate) fn embed_nodes(&self, g: &mut Graph<T>, b: &Bound, x: Var) -> Result<Var> {
        Ok(g.linear(x, b.node_w, Some(b.node_b))?)
    }

    /// Residual encoder layers on node embeddings `h` (`[B, n, d]`). The
    /// edge update of the last layer only matters when the final edge
    /// embeddings are wanted (`full_edges`); decoding reads nodes only.
    pub(crate) fn encode_graph(
        &self,
        g: &mut Graph<T>,
        b: &Bound,
        norms: &mut Norms<'_, T>,
        mut h: Var,
        cache: &EdgeCache,
        full_edges: bool,
    ) -> Result<(Var, Var)> {
        let layers = self.config.layers;
        let mut e = cache.e1;
        for (l, bl) in b.layers.iter().enumerate() {
            let w1h = g.linear(h, bl.w[0], None)?;
            let w2h = g.linear(h, bl.w[1], None)?;
            let gate = if l == 0 { cache.gate1 } else { g.sigmoid(e)? };
            let msg = g.gated_neighbor_sum(gate, w2h)?;
            let pre = g.add(w1h, msg)?;
            let nrm = norms.apply(g, self.config.norm, pre, bl.node_gamma, bl.node_beta, l, false)?;
            let act = g.relu(nrm)?;
            let h_next = g.add(h, act)?;
            if full_edges || l + 1 < layers {
                let w3e = match (l, cache.w3e1) {
                    (0, Some(v)) => v,
                    _ => g.linear(e, bl.w[2], None)?,
                };
                let w4h = g.linear(h, bl.w[3], None)?;
                let w5h = g.linear(h, bl.w[4], None)?;
                let pre = g.pair_sum(Some(w3e), w4h, w5h)?;
                let nrm = norms.apply(g, self.config.norm, pre, bl.edge_gamma, bl.edge_beta, l, true)?;
                let act = g.relu(nrm)?;
                e = g.add(e, act)?;
            }
            h = h_next;
        }
        Ok((h, e))
    }

    /// Logits `[B, n]` for node embeddings `h` and per-node weights of the
    /// placed-items mean (`1 / |placed|` on placed items, else 0).
    pub(crate) fn decode_graph(&self, g: &mut Graph<T>, b: &Bound, h: Var, placed_weights: &[T]) -> Result<Var> {
        let d = self.config.d;
        let heads = self.config.heads;
        let batch = g.shape(h)[0];
        let n = g.shape(h)[1];
        let hg = g.mean(h, 1)?;
        let hp = g.weighted_node_sum(h, placed_weights)?;
        let cat = g.concat(&[hg, hp], 1)?;
        let ctx = g.linear(cat, b.context, None)?;

        let q = g.linear(ctx, b.mha[0], None)?;
        let k = g.linear(h, b.mha[1], None)?;
        let v = g.linear(h, b.mha[2], None)?;
        let scores = g.attn_scores(q, k, heads)?;
        let scores = g.scale(scores, T::lit(1.0 / ((d / heads) as f64).sqrt()))?;
        let attn = g.softmax(scores, 2, None)?;
        let mixed = g.attn_combine(attn, v, heads)?;
        let hc = g.linear(mixed, b.mha[3], None)?;

        let lq = g.linear(hc, b.logit_q, None)?;
        let lk = g.linear(h, b.logit_k, None)?;
        let u = g.attn_scores(lq, lk, 1)?;
        let u = g.scale(u, T::lit(1.0 / (d as f64).sqrt()))?;
        let u = g.tanh(u)?;
        let u = g.scale(u, T::lit(self.config.clip))?;
        Ok(g.reshape(u, &[batch, n])?)
    }

    /// Embeddings of one instance: node embeddings `[n, d]` and edge
    /// embeddings `[n, n, d]`.
    pub fn embed(&self, x: &NodeStateFeatures, y: &EdgeFeatures) -> Result<(Tensor<T>, Tensor<T>)> {
        let n = x.n;
        if y.n() != n {
            return Err(ModelError::InvalidArgument(format!(
                "node features for {n} items, edge features for {}",
                y.n()
            )));
        }
        let mut g = Graph::inference();
        let b = self.bind(&mut g);
        let xv = g.constant(Tensor::from_f64(&[n, 2], &x.x)?);
        let yv = g.constant(Tensor::from_f64(&[n, n, 1], y.values())?);
        let h = self.embed_nodes(&mut g, &b, xv)?;
        let e = g.linear(yv, b.edge_w, Some(b.edge_b))?;
        Ok((g.value(h).clone(), g.value(e).clone()))
    }

    /// Runs every encoder layer (node and edge updates) on one instance.
    /// With [`NormStats::Batch`], train mode normalizes with batch statistics
    /// and updates the running estimates.
    pub fn encode(&mut self, h1: &Tensor<T>, e1: &Tensor<T>, mode: BnMode) -> Result<(Tensor<T>, Tensor<T>)> {
        let d = self.config.d;
        let n = h1.shape().first().copied().unwrap_or(0);
        if h1.shape() != [n, d] || e1.shape() != [n, n, d] {
            return Err(ModelError::InvalidArgument(format!(
                "expected [n, {d}] and [n, n, {d}], got {:?} and {:?}",
                h1.shape(),
                e1.shape()
            )));
        }
        let mut g = Graph::inference();
        let b = self.bind(&mut g);
        let h = g.constant(h1.clone().reshaped(&[1, n, d])?);
        let e = g.constant(e1.clone().reshaped(&[1, n, n, d])?);
        let gate1 = g.sigmoid(e)?;
        let cache = EdgeCache { e1: e, gate1, w3e1: None };
        let mut norms_buf = std::mem::take(&mut self.norms);
        let out = {
            let mut norms = match mode {
                BnMode::Train => Norms::Train(&mut norms_buf),
                BnMode::Infer => Norms::Infer(&norms_buf),
            };
            self.encode_graph(&mut g, &b, &mut norms, h, &cache, true)
        };
        self.norms = norms_buf;
        let (h, e) = out?;
        Ok((
            g.value(h).clone().reshaped(&[n, d])?,
            g.value(e).clone().reshaped(&[n, n, d])?,
        ))
    }

    /// Clipped logits of every item (placed ones included) given final node
    /// embeddings `h` (`[n, d]`) and the partial solution. The graph
    /// embedding is the readout of `h`.
    pub fn decode_logits(&self, h: &Tensor<T>, state: &DecoderState) -> Result<Vec<f64>> {
        let d = self.config.d;
        let n = state.n();
        if h.shape() != [n, d] {
            return Err(ModelError::InvalidArgument(format!(
                "expected embeddings [{n}, {d}], got {:?}",
                h.shape()
            )));
        }
        if state.is_complete() {
            return Err(ModelError::State("every item is already placed".into()));
        }
        let mut g = Graph::inference();
        let b = self.bind(&mut g);
        let hv = g.constant(h.clone().reshaped(&[1, n, d])?);
        let w = placed_weights::<T>(std::slice::from_ref(state));
        let logits = self.decode_graph(&mut g, &b, hv, &w)?;
        Ok(g.value(logits).to_f64_vec())
    }

    /// Probability of placing each item next; placed items get exactly 0.
    pub fn decode_step(&self, h: &Tensor<T>, state: &DecoderState) -> Result<Vec<f64>> {
        let logits = self.decode_logits(h, state)?;
        let allowed: Vec<bool> = state.mask().iter().map(|m| !m).collect();
        Ok(masked_softmax(&logits, &allowed))
    }

    /// Step distribution as seen by a rollout: featurize, embed, encode
    /// (inference mode) and decode. Without per-step re-encoding the
    /// encoder sees the empty solution.
    pub fn step_probabilities(&self, inst: &LopInstance, state: &DecoderState) -> Result<Vec<f64>> {
        let encoded_state = if self.config.reencode_each_step {
            state.clone()
        } else {
            DecoderState::new(state.n())
        };
        let (x, y) = featurize(inst, &encoded_state)?;
        let (h1, e1) = self.embed(&x, &y)?;
        let mut g = Graph::inference();
        let b = self.bind(&mut g);
        let n = inst.n();
        let d = self.config.d;
        let h = g.constant(h1.reshaped(&[1, n, d])?);
        let e = g.constant(e1.reshaped(&[1, n, n, d])?);
        let gate1 = g.sigmoid(e)?;
        let cache = EdgeCache { e1: e, gate1, w3e1: None };
        let (h, _) = self.encode_graph(&mut g, &b, &mut Norms::Infer(&self.norms), h, &cache, false)?;
        let h = g.value(h).clone().reshaped(&[n, d])?;
        self.decode_step(&h, state)
    }
}

/// Mean over node rows of `h` (`[n, d]` or `[B, n, d]`, averaged over `n`).
pub fn graph_readout<T: Scalar>(h: &Tensor<T>) -> Result<Tensor<T>> {
    let mut g = Graph::inference();
    let axis = h.shape().len().checked_sub(2).ok_or_else(|| {
        ModelError::InvalidArgument(format!("readout needs node rows, got shape {:?}", h.shape()))
    })?;
    let v = g.constant(h.clone());
    let m = g.mean(v, axis)?;
    Ok(g.value(m).clone())
}

pub(crate) fn placed_weights<T: Scalar>(states: &[DecoderState]) -> Vec<T> {
    let mut w = Vec::with_capacity(states.iter().map(|s| s.n()).sum());
    for s in states {
        let k = s.placed().len();
        let inv = if k == 0 { T::zero() } else { T::lit(1.0 / k as f64) };
        w.extend(s.mask().iter().map(|&m| if m { inv } else { T::zero() }));
    }
    w
}

/// Softmax over allowed entries in `f64`; excluded entries get exactly 0.
pub(crate) fn masked_softmax<T: Scalar>(logits: &[T], allowed: &[bool]) -> Vec<f64> {
    let max = logits
        .iter()
        .zip(allowed)
        .filter(|(_, &a)| a)
        .map(|(v, _)| v.as_f64())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits
        .iter()
        .zip(allowed)
        .map(|(v, &a)| if a { (v.as_f64() - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    p
}
