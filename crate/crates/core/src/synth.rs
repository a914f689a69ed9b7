//! Synthetic benchmark graphs with known structure.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::graph::{GraphBuilder, HinGraph};

/// Two planted blocks of `n_per_block` nodes. Ordered intra-block
/// pairs get an `e_intra` edge with probability `p_intra`, cross-block
/// pairs an `e_inter` edge with probability `p_inter`. Returns the
/// graph and the block labels; node `n{i}` has label `labels[i]`
/// (node ids follow edge-file appearance order, so map through the
/// name when pairing labels with rows).
pub fn two_block(
    n_per_block: usize,
    p_intra: f64,
    p_inter: f64,
    seed: u64,
) -> (HinGraph, Vec<usize>) {
    let n = 2 * n_per_block;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = GraphBuilder::new();
    let name = |i: usize| format!("n{i}");
    let mut labels = vec![0; n];
    let mut edges: Vec<(usize, String, usize)> = Vec::new();
    for u in 0..n {
        labels[u] = u / n_per_block;
        for v in 0..n {
            if u == v {
                continue;
            }
            let same = u / n_per_block == v / n_per_block;
            let (p, ty) = if same {
                (p_intra, "e_intra")
            } else {
                (p_inter, "e_inter")
            };
            if rng.gen_bool(p) {
                edges.push((u, ty.to_string(), v));
            }
        }
    }
    // first-appearance order defines ids; make it 0..n by adding a
    // self-loop-free ordering pass: insert edges sorted by source
    edges.sort_by_key(|(u, _, v)| (*u, *v));
    for (u, ty, v) in &edges {
        b.add_edge(&name(*u), ty, &name(*v));
    }
    (b.build(), labels)
}
