//! Lloyd's algorithm with k-means++ seeding and best-of-restarts
//! selection by within-cluster sum of squares.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct KmeansResult {
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub wcss: f64,
    /// WCSS after each Lloyd iteration of the winning restart
    pub wcss_history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_seed(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..points.len())].to_vec());
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| sq_dist(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.gen_range(0..points.len())
        } else {
            let mut u = rng.gen_range(0.0..total);
            let mut idx = 0;
            for (i, w) in d2.iter().enumerate() {
                u -= w;
                if u <= 0.0 {
                    idx = i;
                    break;
                }
            }
            idx
        };
        centroids.push(points[next].to_vec());
        for (i, p) in points.iter().enumerate() {
            let d = sq_dist(p, centroids.last().unwrap());
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centroids
}

fn lloyd(points: &[&[f64]], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> KmeansResult {
    let k = centroids.len();
    let dim = points[0].len();
    let mut assignment = vec![0usize; points.len()];
    let mut history = Vec::new();
    for _ in 0..max_iter {
        let mut wcss = 0.0;
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (best, d) = centroids
                .iter()
                .enumerate()
                .map(|(c, ctr)| (c, sq_dist(p, ctr)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
            wcss += d;
        }
        history.push(wcss);
        if !changed && history.len() > 1 {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            counts[assignment[i]] += 1;
            for (s, v) in sums[assignment[i]].iter_mut().zip(*p) {
                *s += v;
            }
        }
        for c in 0..k {
            // empty clusters keep their old centroid
            if counts[c] > 0 {
                for (s, ctr) in sums[c].iter_mut().zip(&mut centroids[c]) {
                    *ctr = *s / counts[c] as f64;
                }
            }
        }
    }
    let wcss = *history.last().unwrap();
    KmeansResult {
        assignment,
        centroids,
        wcss,
        wcss_history: history,
    }
}

pub fn kmeans(
    points: &[&[f64]],
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<KmeansResult> {
    if k == 0 || k > points.len() {
        return Err(Error::BadClusterCount(k, points.len()));
    }
    let restarts = restarts.max(1);
    let mut best: Option<KmeansResult> = None;
    for r in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
        let centroids = plus_plus_seed(points, k, &mut rng);
        let result = lloyd(points, centroids, 100);
        if best.as_ref().is_none_or(|b| result.wcss < b.wcss) {
            best = Some(result);
        }
    }
    Ok(best.unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn as_refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(|p| p.as_slice()).collect()
    }

    #[test]
    fn separated_clouds_split_perfectly() {
        let mut points = Vec::new();
        for i in 0..10 {
            points.push(vec![0.0 + 0.01 * i as f64, 0.0]);
            points.push(vec![100.0 + 0.01 * i as f64, 0.0]);
        }
        let r = kmeans(&as_refs(&points), 2, 0, 5).unwrap();
        for i in (0..20).step_by(2) {
            assert_eq!(r.assignment[i], r.assignment[0]);
            assert_ne!(r.assignment[i + 1], r.assignment[0]);
        }
    }

    #[test]
    fn k_equals_n_gives_zero_wcss() {
        let points: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, -(i as f64)]).collect();
        let r = kmeans(&as_refs(&points), 5, 3, 10).unwrap();
        assert!(r.wcss < 1e-12);
        let mut clusters: Vec<usize> = r.assignment.clone();
        clusters.sort_unstable();
        clusters.dedup();
        assert_eq!(clusters.len(), 5);
    }

    #[test]
    fn wcss_monotone_nonincreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let points: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let r = kmeans(&as_refs(&points), 4, 7, 3).unwrap();
        for w in r.wcss_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "history {:?}", r.wcss_history);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let points: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let a = kmeans(&as_refs(&points), 3, 9, 4).unwrap();
        let b = kmeans(&as_refs(&points), 3, 9, 4).unwrap();
        assert_eq!(a.assignment, b.assignment);
    }

    #[test]
    fn bad_k_rejected() {
        let points = [vec![0.0], vec![1.0]];
        assert!(kmeans(&as_refs(&points), 3, 0, 1).is_err());
        assert!(kmeans(&as_refs(&points), 0, 0, 1).is_err());
    }
}
