//! Clustering/ranking metrics: NMI, Micro/Macro-F1, MAP@K and top-k
//! neighbor queries.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::io::NamedEmbeddings;

/// Normalized mutual information I(A;B) / sqrt(H(A) H(B)).
/// Degenerate partitions (zero entropy on either side) score 0.
pub fn nmi(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let mut joint: HashMap<(usize, usize), f64> = HashMap::new();
    let mut ca: HashMap<usize, f64> = HashMap::new();
    let mut cb: HashMap<usize, f64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_insert(0.0) += 1.0;
        *ca.entry(x).or_insert(0.0) += 1.0;
        *cb.entry(y).or_insert(0.0) += 1.0;
    }
    let n = n as f64;
    let entropy = |counts: &HashMap<usize, f64>| -> f64 {
        counts
            .values()
            .map(|&c| {
                let p = c / n;
                -p * p.ln()
            })
            .sum()
    };
    let ha = entropy(&ca);
    let hb = entropy(&cb);
    if ha <= 0.0 || hb <= 0.0 {
        return 0.0;
    }
    let mut mi = 0.0;
    for (&(x, y), &c) in &joint {
        let pxy = c / n;
        let px = ca[&x] / n;
        let py = cb[&y] / n;
        mi += pxy * (pxy / (px * py)).ln();
    }
    (mi / (ha * hb).sqrt()).clamp(0.0, 1.0)
}

/// (macro, micro) F1 over `class_count` declared classes. Micro pools
/// counts (equals accuracy for single-label predictions); macro is the
/// unweighted mean of per-class F1, with absent classes contributing 0.
pub fn f1_scores(predictions: &[usize], truth: &[usize], class_count: usize) -> (f64, f64) {
    assert_eq!(predictions.len(), truth.len());
    let mut tp = vec![0.0; class_count];
    let mut fp = vec![0.0; class_count];
    let mut fnc = vec![0.0; class_count];
    let mut correct = 0usize;
    for (&p, &t) in predictions.iter().zip(truth) {
        if p == t {
            correct += 1;
            tp[t] += 1.0;
        } else {
            fp[p] += 1.0;
            fnc[t] += 1.0;
        }
    }
    let mut macro_sum = 0.0;
    for c in 0..class_count {
        let denom = 2.0 * tp[c] + fp[c] + fnc[c];
        if denom > 0.0 {
            macro_sum += 2.0 * tp[c] / denom;
        }
    }
    let macro_f1 = macro_sum / class_count as f64;
    let micro_f1 = if predictions.is_empty() {
        0.0
    } else {
        correct as f64 / predictions.len() as f64
    };
    (macro_f1, micro_f1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Similarity {
    Cosine,
    Dot,
}

pub fn similarity(metric: Similarity, a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    match metric {
        Similarity::Dot => dot,
        Similarity::Cosine => {
            let na: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            if na <= 0.0 || nb <= 0.0 {
                0.0
            } else {
                dot / (na * nb)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct MapResult {
    pub map: f64,
    pub queries_evaluated: usize,
    /// queries with no positive, excluded from the mean
    pub queries_skipped: usize,
}

/// MAP@K over labeled nodes: for each query, every other labeled node
/// is ranked by similarity (descending, ties by index ascending) and
/// AP@K = Σ_{hits at rank i<=K} P(i) / min(R, K) with R the number of
/// positives.
pub fn map_at_k(
    vectors: &[&[f64]],
    labels: &[usize],
    queries: &[usize],
    k: usize,
    metric: Similarity,
) -> MapResult {
    assert!(k >= 1);
    assert_eq!(vectors.len(), labels.len());
    let mut sum = 0.0;
    let mut evaluated = 0;
    let mut skipped = 0;
    for &q in queries {
        let positives = labels
            .iter()
            .enumerate()
            .filter(|(i, &l)| *i != q && l == labels[q])
            .count();
        if positives == 0 {
            skipped += 1;
            continue;
        }
        let mut ranked: Vec<(usize, f64)> = (0..vectors.len())
            .filter(|&i| i != q)
            .map(|i| (i, similarity(metric, vectors[q], vectors[i])))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut hits = 0usize;
        let mut ap = 0.0;
        for (rank, (i, _)) in ranked.iter().take(k).enumerate() {
            if labels[*i] == labels[q] {
                hits += 1;
                ap += hits as f64 / (rank + 1) as f64;
            }
        }
        sum += ap / positives.min(k) as f64;
        evaluated += 1;
    }
    MapResult {
        map: if evaluated > 0 {
            sum / evaluated as f64
        } else {
            0.0
        },
        queries_evaluated: evaluated,
        queries_skipped: skipped,
    }
}

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut cur = vec![i + 1];
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur.push(sub.min(prev[j + 1] + 1).min(cur[j] + 1));
        }
        prev = cur;
    }
    prev[b.len()]
}

/// The k nearest neighbors of `query` (excluded itself), deterministic
/// tie-break by index. Unknown names error with the closest matches.
pub fn top_k_neighbors(
    emb: &NamedEmbeddings,
    query: &str,
    k: usize,
    metric: Similarity,
) -> Result<Vec<(String, f64)>> {
    let Some(q) = emb.position(query) else {
        let mut scored: Vec<(usize, &String)> = emb
            .names
            .iter()
            .map(|n| (levenshtein(query, n), n))
            .collect();
        scored.sort();
        let closest = scored.iter().take(3).map(|(_, n)| (*n).clone()).collect();
        return Err(Error::UnknownNode(query.to_string(), closest));
    };
    let mut ranked: Vec<(usize, f64)> = (0..emb.len())
        .filter(|&i| i != q)
        .map(|i| (i, similarity(metric, emb.vector(q), emb.vector(i))))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked
        .into_iter()
        .take(k)
        .map(|(i, s)| (emb.names[i].clone(), s))
        .collect())
}
