//! Seeded k-means++ with Lloyd refinement. Empty clusters are repaired each
//! round by stealing the globally farthest point, which keeps the objective
//! trace non-increasing and every final cluster non-empty.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{dist_sq, AnalyticsError, EmbeddingMatrix};
use crate::scalar::Real;
use crate::seeds;

#[derive(Debug, Clone, Copy)]
pub struct KmeansParams<T> {
    pub max_iter: usize,
    /// Convergence threshold on the largest centroid movement (Euclidean).
    pub tol: T,
}

impl<T: Real> Default for KmeansParams<T> {
    fn default() -> Self {
        KmeansParams { max_iter: 100, tol: T::of(1e-6) }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterModel<T> {
    pub k: usize,
    pub dim: usize,
    /// Row ids in the order the assignment vector uses.
    pub ids: Vec<String>,
    /// k×dim row-major centroid matrix.
    pub centroids: Vec<T>,
    /// Cluster index per input row.
    pub assignment: Vec<usize>,
    pub sizes: Vec<usize>,
    /// Within-cluster sum of squared distances after each iteration's mean
    /// update; non-increasing.
    pub objective: Vec<T>,
    pub iterations: usize,
}

impl<T: Real> ClusterModel<T> {
    pub fn centroid(&self, c: usize) -> &[T] {
        &self.centroids[c * self.dim..(c + 1) * self.dim]
    }

    /// Row indices belonging to cluster `c`, ascending.
    pub fn members(&self, c: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == c).collect()
    }
}

/// Clusters the rows of `x` into `k` groups. Deterministic in `seed`.
pub fn kmeans<T: Real>(
    x: &EmbeddingMatrix<T>,
    k: usize,
    seed: u64,
    params: KmeansParams<T>,
) -> Result<ClusterModel<T>, AnalyticsError> {
    let n = x.nrows();
    let dim = x.dim();
    if k == 0 || k > n {
        return Err(AnalyticsError::KOutOfRange { k, n });
    }

    let mut rng = seeds::rng(seed, "kmeans", 0);
    let chosen = seed_plus_plus(x, k, &mut rng);
    let mut centroids = vec![T::zero(); k * dim];
    for (c, &idx) in chosen.iter().enumerate() {
        centroids[c * dim..(c + 1) * dim].copy_from_slice(x.row(idx));
    }

    let mut assignment = vec![0usize; n];
    let mut sizes = vec![0usize; k];
    let mut objective = Vec::new();
    let mut iterations = 0;

    while iterations < params.max_iter {
        iterations += 1;

        // Assignment step; strict < keeps the lower cluster index on ties.
        for i in 0..n {
            let mut best_c = 0;
            let mut best_d = dist_sq(x.row(i), &centroids[..dim]);
            for c in 1..k {
                let d = dist_sq(x.row(i), &centroids[c * dim..(c + 1) * dim]);
                if d < best_d {
                    best_d = d;
                    best_c = c;
                }
            }
            assignment[i] = best_c;
        }
        sizes.fill(0);
        for &a in &assignment {
            sizes[a] += 1;
        }

        // Repair empty clusters in ascending index order: each steals the
        // point farthest from its current centroid, drawn from clusters that
        // can spare one.
        for c in 0..k {
            if sizes[c] > 0 {
                continue;
            }
            let mut steal: Option<(T, usize)> = None;
            for i in 0..n {
                if sizes[assignment[i]] <= 1 {
                    continue;
                }
                let home = assignment[i];
                let d = dist_sq(x.row(i), &centroids[home * dim..(home + 1) * dim]);
                if steal.map_or(true, |(best, _)| d > best) {
                    steal = Some((d, i));
                }
            }
            let (_, i) = steal.expect("k <= n leaves a donor for every empty cluster");
            sizes[assignment[i]] -= 1;
            assignment[i] = c;
            sizes[c] = 1;
        }

        // Mean update.
        let mut next = vec![T::zero(); k * dim];
        for i in 0..n {
            let base = assignment[i] * dim;
            for (a, &v) in x.row(i).iter().enumerate() {
                next[base + a] += v;
            }
        }
        for c in 0..k {
            let count = T::from_usize(sizes[c]).unwrap();
            for a in 0..dim {
                next[c * dim + a] /= count;
            }
        }

        let obj = (0..n)
            .map(|i| {
                let base = assignment[i] * dim;
                dist_sq(x.row(i), &next[base..base + dim])
            })
            .sum::<T>();
        objective.push(obj);

        let movement = (0..k)
            .map(|c| dist_sq(&centroids[c * dim..(c + 1) * dim], &next[c * dim..(c + 1) * dim]))
            .fold(T::zero(), T::max)
            .sqrt();
        centroids = next;
        if movement < params.tol {
            break;
        }
    }

    Ok(ClusterModel {
        k,
        dim,
        ids: x.ids().to_vec(),
        centroids,
        assignment,
        sizes,
        objective,
        iterations,
    })
}

/// k-means++ seeding: first center uniform, then D² sampling. Returns point
/// indices. When every remaining distance is zero, falls back to the lowest
/// unchosen index so duplicates still yield k distinct rows.
fn seed_plus_plus<T: Real, R: Rng + ?Sized>(
    x: &EmbeddingMatrix<T>,
    k: usize,
    rng: &mut R,
) -> Vec<usize> {
    let n = x.nrows();
    let mut chosen = Vec::with_capacity(k);
    let first = rng.gen_range(0..n);
    chosen.push(first);
    let mut d2: Vec<T> = (0..n).map(|i| dist_sq(x.row(i), x.row(first))).collect();

    while chosen.len() < k {
        let total: T = d2.iter().copied().sum();
        let next = if total > T::zero() {
            let r = T::of(rng.gen::<f64>()) * total;
            let mut acc = T::zero();
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > r {
                    pick = Some(i);
                    break;
                }
            }
            // r can land on the accumulated total itself; take the last
            // positive-mass point.
            pick.unwrap_or_else(|| {
                (0..n).rev().find(|&i| d2[i] > T::zero()).expect("total > 0")
            })
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for i in 0..n {
            let d = dist_sq(x.row(i), x.row(next));
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    chosen
}
