//! Negative-sampling loss, exact backward pass and SGD updates.

use std::collections::HashMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{EdgeTypeId, NodeId};
use crate::sampler::ChainSample;

use super::{dot, matvec_t_acc, ForwardTape, ModelParams};

/// Numerically stable log(1 + e^x).
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Noise distribution for drawing negatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseDistribution {
    /// endpoint unigram frequency raised to the 3/4 power
    Unigram34,
    Uniform,
}

/// Draws `neg` noise nodes per positive sample.
#[derive(Debug, Clone)]
pub struct NegSampler {
    nodes: Vec<NodeId>,
    cumulative: Vec<f64>,
    pub neg: usize,
}

impl NegSampler {
    pub fn uniform(node_count: usize, neg: usize) -> Self {
        assert!(neg >= 1 && node_count >= 1);
        let nodes: Vec<NodeId> = (0..node_count as u32).map(NodeId).collect();
        let cumulative = (1..=node_count).map(|i| i as f64).collect();
        NegSampler {
            nodes,
            cumulative,
            neg,
        }
    }

    /// Builds the noise table from sample-endpoint frequencies. Falls
    /// back to uniform when the corpus is empty.
    pub fn from_samples(
        samples: &[ChainSample],
        node_count: usize,
        neg: usize,
        dist: NoiseDistribution,
    ) -> Self {
        assert!(neg >= 1);
        if dist == NoiseDistribution::Uniform || samples.is_empty() {
            return NegSampler::uniform(node_count, neg);
        }
        let mut freq: HashMap<NodeId, f64> = HashMap::new();
        for s in samples {
            *freq.entry(s.first).or_insert(0.0) += 1.0;
            *freq.entry(s.last).or_insert(0.0) += 1.0;
        }
        let mut nodes: Vec<NodeId> = freq.keys().copied().collect();
        nodes.sort();
        let mut cumulative = Vec::with_capacity(nodes.len());
        let mut acc = 0.0;
        for v in &nodes {
            acc += freq[v].powf(0.75);
            cumulative.push(acc);
        }
        NegSampler {
            nodes,
            cumulative,
            neg,
        }
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> NodeId {
        let total = *self.cumulative.last().unwrap();
        let u = rng.gen_range(0.0..total);
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.nodes[idx.min(self.nodes.len() - 1)]
    }

    pub fn draw_batch(&self, rng: &mut ChaCha8Rng) -> Vec<NodeId> {
        (0..self.neg).map(|_| self.draw(rng)).collect()
    }
}

/// SGNS surrogate for one chain sample: the composed forward pass is
/// run once and its output scored against the positive and every
/// negative:
///   loss = -log σ(s(v_i, v_j)) - Σ_u log σ(-s(v_i, u)).
pub fn neg_sampling_loss(
    params: &ModelParams,
    sample: &ChainSample,
    negatives: &[NodeId],
) -> Result<(f64, ForwardTape)> {
    let (h, tape) = params.forward_chain(&sample.relations, params.embeddings.row(sample.first))?;
    let s_pos = dot(&h, params.embeddings.row(sample.last));
    let mut loss = softplus(-s_pos);
    for &u in negatives {
        loss += softplus(dot(&h, params.embeddings.row(u)));
    }
    Ok((loss, tape))
}

/// Gradient of one transform, same shapes as the transform itself.
#[derive(Debug, Clone)]
pub struct TransformGrad {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub w3: Vec<f64>,
    pub b3: Vec<f64>,
}

impl TransformGrad {
    fn zeros(dim: usize, hidden: usize) -> Self {
        TransformGrad {
            w1: vec![0.0; hidden * dim],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden * hidden],
            b2: vec![0.0; hidden],
            w3: vec![0.0; dim * hidden],
            b3: vec![0.0; dim],
        }
    }

    fn scale(&mut self, s: f64) {
        for arr in [
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.w3,
            &mut self.b3,
        ] {
            for v in arr.iter_mut() {
                *v *= s;
            }
        }
    }
}

/// Sparse gradient accumulator: only touched Φ rows and touched
/// transforms carry entries.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    pub embed: HashMap<NodeId, Vec<f64>>,
    pub transforms: HashMap<EdgeTypeId, TransformGrad>,
}

impl Gradients {
    pub fn new() -> Self {
        Gradients::default()
    }

    pub fn scale(&mut self, s: f64) {
        for g in self.embed.values_mut() {
            for v in g.iter_mut() {
                *v *= s;
            }
        }
        for g in self.transforms.values_mut() {
            g.scale(s);
        }
    }

    fn embed_row(&mut self, v: NodeId, dim: usize) -> &mut Vec<f64> {
        self.embed.entry(v).or_insert_with(|| vec![0.0; dim])
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

/// dW += dy ⊗ x  for a row-major (rows x cols) weight gradient.
fn outer_acc(dw: &mut [f64], dy: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, &g) in dy.iter().enumerate() {
        let row = &mut dw[r * cols..(r + 1) * cols];
        for (w, &xv) in row.iter_mut().zip(x) {
            *w += g * xv;
        }
    }
}

/// Exact gradients of the negative-sampling loss, accumulated into
/// `grads`. The tape must come from the matching forward pass at the
/// current parameter version.
pub fn accumulate_backward(
    params: &ModelParams,
    tape: &ForwardTape,
    sample: &ChainSample,
    negatives: &[NodeId],
    grads: &mut Gradients,
) -> Result<()> {
    if tape.version != params.version() {
        return Err(Error::StaleTape {
            tape: tape.version,
            current: params.version(),
        });
    }
    let dim = params.dim;
    let h = tape.output();

    // score-level gradients
    let s_pos = dot(h, params.embeddings.row(sample.last));
    let g_pos = sigmoid(s_pos) - 1.0;
    let mut dh = vec![0.0; dim];
    axpy(&mut dh, g_pos, params.embeddings.row(sample.last));
    axpy(grads.embed_row(sample.last, dim), g_pos, h);
    for &u in negatives {
        let g_u = sigmoid(dot(h, params.embeddings.row(u)));
        axpy(&mut dh, g_u, params.embeddings.row(u));
        axpy(grads.embed_row(u, dim), g_u, h);
    }

    // backprop through the composed modules, last to first
    for (k, m) in tape.modules.iter().enumerate().rev() {
        let t = params.transform(m.edge)?;
        let tg = grads
            .transforms
            .entry(m.edge)
            .or_insert_with(|| TransformGrad::zeros(t.dim, t.hidden));

        // output layer: y = W3 a2 + b3
        axpy(&mut tg.b3, 1.0, &dh);
        outer_acc(&mut tg.w3, &dh, &m.a2);
        let mut da2 = vec![0.0; t.hidden];
        matvec_t_acc(&t.w3, &dh, &mut da2, t.dim, t.hidden);
        // ReLU mask: a2[i] > 0 iff pre-activation was > 0
        for (g, &a) in da2.iter_mut().zip(&m.a2) {
            if a <= 0.0 {
                *g = 0.0;
            }
        }

        axpy(&mut tg.b2, 1.0, &da2);
        outer_acc(&mut tg.w2, &da2, &m.a1);
        let mut da1 = vec![0.0; t.hidden];
        matvec_t_acc(&t.w2, &da2, &mut da1, t.hidden, t.hidden);
        for (g, &a) in da1.iter_mut().zip(&m.a1) {
            if a <= 0.0 {
                *g = 0.0;
            }
        }

        axpy(&mut tg.b1, 1.0, &da1);
        outer_acc(&mut tg.w1, &da1, &m.input);
        let mut dx = vec![0.0; t.dim];
        matvec_t_acc(&t.w1, &da1, &mut dx, t.hidden, t.dim);

        if k == 0 {
            axpy(grads.embed_row(sample.first, dim), 1.0, &dx);
        } else {
            // junction ReLU: m.input = relu(previous output)
            for (g, &a) in dx.iter_mut().zip(&m.input) {
                if a <= 0.0 {
                    *g = 0.0;
                }
            }
            dh = dx;
        }
    }
    Ok(())
}

pub fn backward(
    params: &ModelParams,
    tape: &ForwardTape,
    sample: &ChainSample,
    negatives: &[NodeId],
) -> Result<Gradients> {
    let mut grads = Gradients::new();
    accumulate_backward(params, tape, sample, negatives, &mut grads)?;
    Ok(grads)
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// In-place SGD update. Φ rows move with `eta_embed`, transform
/// parameters with `eta_dnn`. Any non-finite result aborts with a
/// diagnostic naming the parameter block; the parameter version is
/// bumped so outstanding tapes become stale.
pub fn sgd_step(
    params: &mut ModelParams,
    grads: &Gradients,
    eta_embed: f64,
    eta_dnn: f64,
) -> Result<()> {
    for (&v, g) in &grads.embed {
        let row = params.embeddings.row_mut(v);
        axpy(row, -eta_embed, g);
        check_finite(row, &format!("embedding row {v}"))?;
    }
    for (&e, g) in &grads.transforms {
        let t = &mut params.transforms[e.index()];
        for (name, param, grad) in [
            ("w1", &mut t.w1, &g.w1),
            ("b1", &mut t.b1, &g.b1),
            ("w2", &mut t.w2, &g.w2),
            ("b2", &mut t.b2, &g.b2),
            ("w3", &mut t.w3, &g.w3),
            ("b3", &mut t.b3, &g.b3),
        ] {
            axpy(param, -eta_dnn, grad);
            check_finite(param, &format!("transform {} {name}", e.0))?;
        }
    }
    params.bump_version();
    Ok(())
}
