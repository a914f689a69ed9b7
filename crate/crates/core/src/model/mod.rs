//! Parameter store and differentiable core.
//!
//! Every node has one d-dimensional row in the embedding table; the
//! same row serves as input representation and output scoring vector.
//! Every edge type owns a 4-layer transform d -> h -> h -> d with ReLU
//! between layers. Chains compose transforms with ReLU at module
//! junctions; the final module output stays linear so scores can be
//! negative. Gradients are hand-derived for this fixed architecture.

mod loss;
mod signature;

pub use loss::{
    accumulate_backward, backward, neg_sampling_loss, sgd_step, Gradients, NegSampler,
    NoiseDistribution,
};
pub use signature::{enumerate_signatures, SignatureId, SignatureRegistry};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::{EdgeTypeId, NodeId};

/// The matrix Φ: one row per node, shared between input lookup and
/// output scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn zeros(nodes: usize, dim: usize) -> Self {
        EmbeddingTable {
            dim,
            data: vec![0.0; nodes * dim],
        }
    }

    /// word2vec-style init: uniform in [-0.5/d, 0.5/d].
    pub fn init(nodes: usize, dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let half = 0.5 / dim as f64;
        EmbeddingTable {
            dim,
            data: (0..nodes * dim).map(|_| rng.gen_range(-half..half)).collect(),
        }
    }

    pub fn from_vec(dim: usize, data: Vec<f64>) -> Self {
        assert!(dim > 0 && data.len().is_multiple_of(dim));
        EmbeddingTable { dim, data }
    }

    pub fn node_count(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, v: NodeId) -> &[f64] {
        let i = v.index() * self.dim;
        &self.data[i..i + self.dim]
    }

    pub fn row_mut(&mut self, v: NodeId) -> &mut [f64] {
        let i = v.index() * self.dim;
        &mut self.data[i..i + self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = (NodeId, &[f64])> + '_ {
        (0..self.node_count()).map(|i| (NodeId(i as u32), self.row(NodeId(i as u32))))
    }
}

/// Per-edge-type trainable transform: d -> h -> h -> d, row-major
/// weight matrices, internal ReLUs, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationTransform {
    pub dim: usize,
    pub hidden: usize,
    pub w1: Vec<f64>, // h x d
    pub b1: Vec<f64>, // h
    pub w2: Vec<f64>, // h x h
    pub b2: Vec<f64>, // h
    pub w3: Vec<f64>, // d x h
    pub b3: Vec<f64>, // d
}

impl RelationTransform {
    pub fn zeros(dim: usize, hidden: usize) -> Self {
        RelationTransform {
            dim,
            hidden,
            w1: vec![0.0; hidden * dim],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden * hidden],
            b2: vec![0.0; hidden],
            w3: vec![0.0; dim * hidden],
            b3: vec![0.0; dim],
        }
    }

    /// He init on weights (scaled Gaussian for ReLU fan-in). Biases
    /// get a small uniform jitter so pre-activations are almost surely
    /// away from the ReLU kink (an exactly-zero pre-activation would
    /// make the subgradient choice at 0 observable).
    pub fn init(dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut t = RelationTransform::zeros(dim, hidden);
        fill_he(&mut t.w1, dim, rng);
        fill_he(&mut t.w2, hidden, rng);
        fill_he(&mut t.w3, hidden, rng);
        for b in [&mut t.b1, &mut t.b2, &mut t.b3] {
            for x in b.iter_mut() {
                *x = rng.gen_range(-0.01..0.01);
            }
        }
        t
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len() + self.w3.len() + self.b3.len()
    }
}

fn fill_he(w: &mut [f64], fan_in: usize, rng: &mut ChaCha8Rng) {
    let scale = (2.0 / fan_in as f64).sqrt();
    for x in w.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *x = z * scale;
    }
}

/// y += W x  for a row-major (rows x cols) matrix.
fn matvec_acc(w: &[f64], x: &[f64], y: &mut [f64], rows: usize, cols: usize) {
    debug_assert_eq!(w.len(), rows * cols);
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for (a, b) in row.iter().zip(x) {
            acc += a * b;
        }
        y[r] += acc;
    }
}

/// y += W^T x  for the same layout.
fn matvec_t_acc(w: &[f64], x: &[f64], y: &mut [f64], rows: usize, cols: usize) {
    debug_assert_eq!(w.len(), rows * cols);
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let s = x[r];
        for (yc, a) in y.iter_mut().zip(row) {
            *yc += s * a;
        }
    }
}

fn relu_inplace(x: &mut [f64]) {
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Intermediates recorded for one transform application. ReLU masks
/// are recoverable from the stored activations (a > 0 iff the
/// pre-activation was > 0; the subgradient at 0 is taken as 0).
#[derive(Debug, Clone)]
pub struct ModuleTape {
    pub edge: EdgeTypeId,
    /// module input (after the junction ReLU for modules past the first)
    pub input: Vec<f64>,
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    pub output: Vec<f64>,
}

/// Replayable record of one composed forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTape {
    /// parameter version at record time; guards against stale replays
    pub version: u64,
    pub modules: Vec<ModuleTape>,
}

impl ForwardTape {
    pub fn output(&self) -> &[f64] {
        &self.modules.last().expect("tape has >= 1 module").output
    }
}

/// All trainable state: Φ plus one transform per edge type.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub embeddings: EmbeddingTable,
    pub transforms: Vec<RelationTransform>,
    pub dim: usize,
    pub hidden: usize,
    version: u64,
}

impl ModelParams {
    pub fn zeros(nodes: usize, edge_types: usize, dim: usize, hidden: usize) -> Self {
        ModelParams {
            embeddings: EmbeddingTable::zeros(nodes, dim),
            transforms: (0..edge_types)
                .map(|_| RelationTransform::zeros(dim, hidden))
                .collect(),
            dim,
            hidden,
            version: 0,
        }
    }

    pub fn init(nodes: usize, edge_types: usize, dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ModelParams {
            embeddings: EmbeddingTable::init(nodes, dim, &mut rng),
            transforms: (0..edge_types)
                .map(|_| RelationTransform::init(dim, hidden, &mut rng))
                .collect(),
            dim,
            hidden,
            version: 0,
        }
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub(crate) fn bump_version(&mut self) {
        self.version += 1;
    }

    pub fn transform(&self, e: EdgeTypeId) -> Result<&RelationTransform> {
        self.transforms
            .get(e.index())
            .ok_or(Error::InvalidEdgeTypeId(e.0, self.transforms.len()))
    }

    /// Applies the transform for edge type `e`:
    /// y = W3 relu(W2 relu(W1 x + b1) + b2) + b3.
    pub fn forward_transform(&self, e: EdgeTypeId, x: &[f64]) -> Result<(Vec<f64>, ForwardTape)> {
        self.forward_chain(&[e], x)
    }

    /// Applies transforms in order, with ReLU applied to each module's
    /// output before it enters the next module; the final output is
    /// linear.
    pub fn forward_chain(&self, sig: &[EdgeTypeId], x: &[f64]) -> Result<(Vec<f64>, ForwardTape)> {
        assert!(!sig.is_empty(), "chain signature must be nonempty");
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut modules = Vec::with_capacity(sig.len());
        let mut input = x.to_vec();
        for (k, &e) in sig.iter().enumerate() {
            if k > 0 {
                relu_inplace(&mut input);
            }
            let t = self.transform(e)?;
            let mut a1 = t.b1.clone();
            matvec_acc(&t.w1, &input, &mut a1, t.hidden, t.dim);
            relu_inplace(&mut a1);
            let mut a2 = t.b2.clone();
            matvec_acc(&t.w2, &a1, &mut a2, t.hidden, t.hidden);
            relu_inplace(&mut a2);
            let mut output = t.b3.clone();
            matvec_acc(&t.w3, &a2, &mut output, t.dim, t.hidden);
            modules.push(ModuleTape {
                edge: e,
                input,
                a1,
                a2,
                output: output.clone(),
            });
            input = output;
        }
        let tape = ForwardTape {
            version: self.version,
            modules,
        };
        Ok((input, tape))
    }

    /// Proximity of (v_i, v_j) through a relation chain: the composed
    /// transform of Φ(v_i), dotted with Φ(v_j).
    pub fn score(&self, sig: &[EdgeTypeId], v_i: NodeId, v_j: NodeId) -> Result<f64> {
        let (h, _) = self.forward_chain(sig, self.embeddings.row(v_i))?;
        Ok(dot(&h, self.embeddings.row(v_j)))
    }

    /// Full softmax probability of v_j given v_i and the chain,
    /// normalized over the whole vocabulary with max-subtraction.
    /// Oracle/testing use only; training uses negative sampling.
    pub fn full_softmax_prob(&self, sig: &[EdgeTypeId], v_i: NodeId, v_j: NodeId) -> Result<f64> {
        let (h, _) = self.forward_chain(sig, self.embeddings.row(v_i))?;
        let scores: Vec<f64> = self
            .embeddings
            .rows()
            .map(|(_, row)| dot(&h, row))
            .collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = scores.iter().map(|s| (s - max).exp()).sum();
        Ok((scores[v_j.index()] - max).exp() / denom)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
