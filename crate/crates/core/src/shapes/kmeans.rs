//! Lloyd's k-means with k-means++ seeding.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::model::{rng_from_seed, Dataset};

const MAX_ITER: usize = 100;
const CENTER_TOL: f64 = 1e-8;

/// Outcome of [`kmeans`].
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centers: Vec<Vec<f64>>,
    /// Cluster index of every row.
    pub labels: Vec<usize>,
    pub iterations: usize,
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centers: &[Vec<f64>], p: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = dist_sq(c, p);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn seed_centers(data: &Dataset, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    let n = data.n();
    let mut centers = vec![data.row(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = data.rows().map(|r| dist_sq(r, &centers[0])).collect();
    while centers.len() < k {
        let next = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(&mut rng),
            // all points coincide with chosen centers
            Err(_) => rng.random_range(0..n),
        };
        centers.push(data.row(next).to_vec());
        for (i, r) in data.rows().enumerate() {
            d2[i] = d2[i].min(dist_sq(r, &centers[centers.len() - 1]));
        }
    }
    centers
}

/// Partitions the rows into `k` clusters by squared Euclidean distortion.
///
/// A cluster that becomes empty is re-seeded once with the point farthest from its
/// assigned center; a second empty cluster is an error.
pub fn kmeans(data: &Dataset, k: usize, seed: u64) -> Result<KMeansResult> {
    if k == 0 || k > data.n() {
        return invalid(format!("k = {k} must lie in 1..={}", data.n()));
    }
    let m = data.m();
    let mut centers = seed_centers(data, k, seed);
    let mut labels = vec![0; data.n()];
    let mut repaired = false;
    let mut iterations = 0;
    while iterations < MAX_ITER {
        iterations += 1;
        for (i, r) in data.rows().enumerate() {
            labels[i] = nearest(&centers, r).0;
        }
        let mut sums = vec![vec![0.0; m]; k];
        let mut counts = vec![0usize; k];
        for (i, r) in data.rows().enumerate() {
            counts[labels[i]] += 1;
            for (s, v) in sums[labels[i]].iter_mut().zip(r) {
                *s += v;
            }
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            if repaired {
                return Err(Error::ClusterDegeneracy {
                    cluster: empty,
                    size: 0,
                    k,
                });
            }
            repaired = true;
            let far = (0..data.n())
                .max_by(|&a, &b| {
                    let da = dist_sq(data.row(a), &centers[labels[a]]);
                    let db = dist_sq(data.row(b), &centers[labels[b]]);
                    da.total_cmp(&db)
                })
                .expect("non-empty data");
            centers[empty] = data.row(far).to_vec();
            continue;
        }
        let mut shift = 0.0f64;
        for j in 0..k {
            for t in 0..m {
                let v = sums[j][t] / counts[j] as f64;
                shift = shift.max((v - centers[j][t]).abs());
                centers[j][t] = v;
            }
        }
        if shift <= CENTER_TOL {
            break;
        }
    }
    for (i, r) in data.rows().enumerate() {
        labels[i] = nearest(&centers, r).0;
    }
    Ok(KMeansResult {
        centers,
        labels,
        iterations,
    })
}
