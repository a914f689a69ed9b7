//! Multinomial softmax regression on frozen embeddings, plus a
//! stratified train/test split.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Linear softmax classifier trained with full-batch gradient descent
/// and L2 regularization. Deterministic for a fixed seed.
#[derive(Debug, Clone)]
pub struct SoftmaxRegression {
    pub weights: Vec<f64>, // classes x (dim + 1), last column is the bias
    pub dim: usize,
    pub classes: usize,
}

impl SoftmaxRegression {
    pub fn new(dim: usize, classes: usize, seed: u64) -> SoftmaxRegression {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 0.01;
        let weights = (0..classes * (dim + 1))
            .map(|_| rng.gen_range(-scale..scale))
            .collect();
        SoftmaxRegression {
            weights,
            dim,
            classes,
        }
    }

    fn logits(&self, x: &[f64], out: &mut [f64]) {
        for c in 0..self.classes {
            let row = &self.weights[c * (self.dim + 1)..(c + 1) * (self.dim + 1)];
            out[c] = row[self.dim] + x.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    fn probs(&self, x: &[f64], out: &mut [f64]) {
        self.logits(x, out);
        let max = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in out.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in out.iter_mut() {
            *v /= sum;
        }
    }

    /// Mean cross-entropy plus the L2 penalty on the current weights.
    pub fn loss(&self, xs: &[&[f64]], ys: &[usize], l2: f64) -> f64 {
        let mut p = vec![0.0; self.classes];
        let mut total = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            self.probs(x, &mut p);
            total -= p[y].max(1e-300).ln();
        }
        let reg: f64 = self.weights.iter().map(|w| w * w).sum();
        total / xs.len() as f64 + 0.5 * l2 * reg
    }

    /// Gradient of `loss` with respect to the flattened weights.
    pub fn gradient(&self, xs: &[&[f64]], ys: &[usize], l2: f64) -> Vec<f64> {
        let stride = self.dim + 1;
        let mut grad = vec![0.0; self.weights.len()];
        let mut p = vec![0.0; self.classes];
        let inv = 1.0 / xs.len() as f64;
        for (x, &y) in xs.iter().zip(ys) {
            self.probs(x, &mut p);
            for c in 0..self.classes {
                let err = (p[c] - if c == y { 1.0 } else { 0.0 }) * inv;
                let row = &mut grad[c * stride..(c + 1) * stride];
                for (g, v) in row.iter_mut().zip(x.iter()) {
                    *g += err * v;
                }
                row[self.dim] += err;
            }
        }
        for (g, w) in grad.iter_mut().zip(&self.weights) {
            *g += l2 * w;
        }
        grad
    }

    /// Full-batch gradient descent for `epochs` steps.
    pub fn fit(
        &mut self,
        xs: &[&[f64]],
        ys: &[usize],
        lr: f64,
        l2: f64,
        epochs: usize,
    ) -> Result<()> {
        if xs.is_empty() {
            return Err(Error::EmptySample);
        }
        for _ in 0..epochs {
            let grad = self.gradient(xs, ys, l2);
            for (w, g) in self.weights.iter_mut().zip(&grad) {
                *w -= lr * g;
            }
            if self.weights.iter().any(|w| !w.is_finite()) {
                return Err(Error::NonFinite("classifier weights".into()));
            }
        }
        Ok(())
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let mut logits = vec![0.0; self.classes];
        self.logits(x, &mut logits);
        logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(c, _)| c)
            .unwrap()
    }
}

/// Splits labeled indices into (train, test) keeping roughly
/// `test_fraction` of each class in the test set. Deterministic per
/// seed; every class keeps at least one training example when it has
/// any.
pub fn stratified_split(
    labels: &[usize],
    test_fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    assert!((0.0..1.0).contains(&test_fraction));
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for members in &mut by_class {
        members.shuffle(&mut rng);
        let mut n_test = (members.len() as f64 * test_fraction).round() as usize;
        if n_test >= members.len() && !members.is_empty() {
            n_test = members.len() - 1;
        }
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}
