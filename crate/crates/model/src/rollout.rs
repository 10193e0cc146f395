use lop_core::{evaluate, LopInstance, Permutation, Rng};
use lop_tensor::{BnMode, Graph, Scalar, Tensor, Var};

use crate::error::{ModelError, Result};
use crate::model::{masked_softmax, placed_weights, Model, Norms};
use crate::state::{DecoderState, NodeStateFeatures};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RolloutMode {
    /// Most probable item at each step; lowest index on exact ties.
    Greedy,
    /// Draw from the step distribution with a seeded stream.
    Sample,
}

/// How a batched rollout chooses items.
pub enum Decode<'a> {
    Greedy,
    /// One stream per batch entry.
    Sample(&'a mut [Rng]),
    /// Fixed action sequences (teacher forcing), one per batch entry.
    Forced(&'a [Vec<usize>]),
}

/// One complete decoding of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutTrace {
    pub solution: Permutation,
    pub step_log_probs: Vec<f64>,
    pub total_log_prob: f64,
    /// Objective value of `solution`.
    pub reward: f64,
}

/// Result of decoding a batch of same-size instances.
#[derive(Debug, Clone)]
pub struct BatchRollout {
    pub traces: Vec<RolloutTrace>,
    /// Summed log-probabilities (`[B]`) on the caller's tape, when one was
    /// kept.
    pub log_prob: Option<Var>,
    /// Step distributions `[b][t][item]`, when requested.
    pub step_probs: Vec<Vec<Vec<f64>>>,
}

impl BatchRollout {
    pub fn rewards(&self) -> Vec<f64> {
        self.traces.iter().map(|t| t.reward).collect()
    }
}

fn edge_tensor<T: Scalar>(insts: &[&LopInstance]) -> Result<Tensor<T>> {
    let n = insts[0].n();
    let mut y = Vec::with_capacity(insts.len() * n * n);
    for inst in insts {
        let f = lop_core::edge_features(inst).normalized();
        y.extend(f.values().iter().map(|&v| T::lit(v)));
    }
    Ok(Tensor::new(&[insts.len(), n, n, 1], y)?)
}

fn node_tensor<T: Scalar>(states: &[DecoderState]) -> Result<Tensor<T>> {
    let n = states[0].n();
    let mut x = Vec::with_capacity(states.len() * n * 2);
    for s in states {
        x.extend(NodeStateFeatures::from_state(s).x.iter().map(|&v| T::lit(v)));
    }
    Ok(Tensor::new(&[states.len(), n, 2], x)?)
}

fn choose<T: Scalar>(
    logits: &[T],
    allowed: &[bool],
    probs: &[f64],
    decode: &mut Decode<'_>,
    b: usize,
    t: usize,
) -> Result<usize> {
    match decode {
        Decode::Greedy => {
            let mut best: Option<usize> = None;
            for (j, (&v, &ok)) in logits.iter().zip(allowed).enumerate() {
                if ok && best.map_or(true, |k| v > logits[k]) {
                    best = Some(j);
                }
            }
            best.ok_or_else(|| ModelError::State("no unplaced item".into()))
        }
        Decode::Sample(rngs) => {
            let u = rngs[b].uniform_f64();
            let mut acc = 0.0f64;
            let mut last = None;
            for (j, &p) in probs.iter().enumerate() {
                if !allowed[j] {
                    continue;
                }
                acc += p;
                last = Some(j);
                if u < acc {
                    return Ok(j);
                }
            }
            last.ok_or_else(|| ModelError::State("no unplaced item".into()))
        }
        Decode::Forced(actions) => {
            let a = *actions[b]
                .get(t)
                .ok_or_else(|| ModelError::InvalidArgument(format!("forced sequence {b} is too short")))?;
            if a >= allowed.len() || !allowed[a] {
                return Err(ModelError::InvalidArgument(format!(
                    "forced action {a} at step {} of sequence {b} is not available",
                    t + 1
                )));
            }
            Ok(a)
        }
    }
}

impl<T: Scalar> Model<T> {
    #[allow(clippy::too_many_arguments)]
    fn run(
        &self,
        norms: &mut Norms<'_, T>,
        g: &mut Graph<T>,
        keep_tape: bool,
        insts: &[&LopInstance],
        mut decode: Decode<'_>,
        record_probs: bool,
    ) -> Result<BatchRollout> {
        let Some(first) = insts.first() else {
            return Err(ModelError::InvalidArgument("empty batch".into()));
        };
        let n = first.n();
        if let Some(bad) = insts.iter().find(|i| i.n() != n) {
            return Err(ModelError::InvalidArgument(format!(
                "batch mixes sizes {n} and {}",
                bad.n()
            )));
        }
        let batch = insts.len();
        match &decode {
            Decode::Sample(r) if r.len() != insts.len() => {
                return Err(ModelError::InvalidArgument("one sampling stream per instance required".into()))
            }
            Decode::Forced(a) if a.len() != insts.len() => {
                return Err(ModelError::InvalidArgument("one forced sequence per instance required".into()))
            }
            _ => {}
        }

        let b = self.bind(g);
        let y = g.constant(edge_tensor(insts)?);
        let need_w3 = self.config.layers > 1;
        let cache = self.edge_cache(g, &b, y, need_w3)?;
        let mut states = vec![DecoderState::new(n); batch];
        let static_h = if self.config.reencode_each_step {
            None
        } else {
            let x = g.constant(node_tensor(&states)?);
            let h1 = self.embed_nodes(g, &b, x)?;
            Some(self.encode_graph(g, &b, norms, h1, &cache, false)?.0)
        };
        let prefix = g.len();

        let mut total: Option<Var> = None;
        let mut step_lp = vec![Vec::with_capacity(n); batch];
        let mut step_probs = vec![Vec::new(); if record_probs { batch } else { 0 }];
        for t in 0..n {
            let allowed: Vec<bool> = states.iter().flat_map(|s| s.mask().iter().map(|m| !m)).collect();
            if t + 1 == n {
                // a single candidate remains: probability one, no gradient
                for (bi, s) in states.iter_mut().enumerate() {
                    let last = s.unplaced().next().expect("one item left");
                    let mut p = vec![0.0; n];
                    p[last] = 1.0;
                    let a = choose::<T>(&vec![T::zero(); n], &allowed[bi * n..(bi + 1) * n], &p, &mut decode, bi, t)?;
                    s.place(a)?;
                    step_lp[bi].push(0.0);
                    if record_probs {
                        step_probs[bi].push(p);
                    }
                }
                break;
            }
            let h = match static_h {
                Some(h) => h,
                None => {
                    let x = g.constant(node_tensor(&states)?);
                    let h1 = self.embed_nodes(g, &b, x)?;
                    self.encode_graph(g, &b, norms, h1, &cache, false)?.0
                }
            };
            let w = placed_weights::<T>(&states);
            let logits = self.decode_graph(g, &b, h, &w)?;
            let mut actions = Vec::with_capacity(batch);
            {
                let lv = g.value(logits).data();
                for bi in 0..batch {
                    let row = &lv[bi * n..(bi + 1) * n];
                    let ok = &allowed[bi * n..(bi + 1) * n];
                    let p = masked_softmax(row, ok);
                    actions.push(choose(row, ok, &p, &mut decode, bi, t)?);
                    if record_probs {
                        step_probs[bi].push(p);
                    }
                }
            }
            let lp = g.select_log_prob(logits, &allowed, &actions)?;
            for (bi, v) in g.value(lp).data().iter().enumerate() {
                step_lp[bi].push(v.as_f64());
            }
            if keep_tape {
                total = Some(match total {
                    None => lp,
                    Some(acc) => g.add(acc, lp)?,
                });
            }
            for (s, &a) in states.iter_mut().zip(&actions) {
                s.place(a)?;
            }
            if !keep_tape {
                g.truncate(prefix);
            }
        }

        let mut traces = Vec::with_capacity(batch);
        for ((inst, s), lps) in insts.iter().zip(states).zip(step_lp) {
            let solution = Permutation::new(s.placed().to_vec())?;
            let reward = evaluate(inst, &solution)?;
            traces.push(RolloutTrace {
                solution,
                total_log_prob: lps.iter().sum(),
                step_log_probs: lps,
                reward,
            });
        }
        Ok(BatchRollout {
            traces,
            log_prob: total,
            step_probs,
        })
    }

    /// Decodes a batch without recording gradients, with normalization in
    /// inference mode.
    pub fn rollout_batch(&self, insts: &[&LopInstance], decode: Decode<'_>, record_probs: bool) -> Result<BatchRollout> {
        let mut g = Graph::inference();
        self.run(&mut Norms::Infer(&self.norms), &mut g, false, insts, decode, record_probs)
    }

    /// Decodes a batch on the tape `g`, so the returned `log_prob` can be
    /// differentiated. With [`crate::NormStats::Batch`] train mode uses batch
    /// statistics and updates the running estimates.
    pub fn rollout_batch_on(
        &mut self,
        g: &mut Graph<T>,
        insts: &[&LopInstance],
        decode: Decode<'_>,
        mode: BnMode,
    ) -> Result<BatchRollout> {
        let mut norms_buf = std::mem::take(&mut self.norms);
        let out = {
            let mut norms = match mode {
                BnMode::Train => Norms::Train(&mut norms_buf),
                BnMode::Infer => Norms::Infer(&norms_buf),
            };
            self.run(&mut norms, g, true, insts, decode, false)
        };
        self.norms = norms_buf;
        out
    }

    /// Decodes one instance in inference mode. Greedy
    /// decoding ignores `seed`.
    pub fn rollout(&self, inst: &LopInstance, mode: RolloutMode, seed: u64) -> Result<RolloutTrace> {
        let mut rngs = [Rng::new(seed)];
        let decode = match mode {
            RolloutMode::Greedy => Decode::Greedy,
            RolloutMode::Sample => Decode::Sample(&mut rngs),
        };
        let out = self.rollout_batch(&[inst], decode, false)?;
        Ok(out.traces.into_iter().next().expect("one trace"))
    }

    /// Greedy rollouts of many instances; instances of equal size are
    /// decoded together in chunks of at most `chunk`.
    pub fn greedy_many(&self, insts: &[LopInstance], chunk: usize) -> Result<Vec<RolloutTrace>> {
        let mut out: Vec<Option<RolloutTrace>> = vec![None; insts.len()];
        let mut sizes: Vec<usize> = insts.iter().map(|i| i.n()).collect();
        sizes.sort_unstable();
        sizes.dedup();
        for n in sizes {
            let idx: Vec<usize> = (0..insts.len()).filter(|&k| insts[k].n() == n).collect();
            for part in idx.chunks(chunk.max(1)) {
                let refs: Vec<&LopInstance> = part.iter().map(|&k| &insts[k]).collect();
                let res = self.rollout_batch(&refs, Decode::Greedy, false)?;
                for (&k, tr) in part.iter().zip(res.traces) {
                    out[k] = Some(tr);
                }
            }
        }
        Ok(out.into_iter().map(|t| t.expect("every instance decoded")).collect())
    }

    /// Re-scores fixed solutions in inference mode.
    pub fn score(&self, inst: &LopInstance, solution: &Permutation) -> Result<RolloutTrace> {
        let actions = [solution.as_slice().to_vec()];
        let out = self.rollout_batch(&[inst], Decode::Forced(&actions), false)?;
        Ok(out.traces.into_iter().next().expect("one trace"))
    }
}
