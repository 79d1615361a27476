//! Exact brute-force k-nearest-neighbour coverage: for each query, which
//! fraction of its k nearest corpus rows carries a positive label. Coverage
//! values are histogrammed into equal-width bins over [0, 1].

use super::{dist_sq, AnalyticsError, EmbeddingMatrix};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct CoverageReport<T> {
    pub k: usize,
    /// Per-query fraction of the k nearest corpus rows with a true label.
    pub coverage: Vec<T>,
    /// Per-query corpus row indices, nearest first; distance ties broken
    /// toward the lower index.
    pub neighbors: Vec<Vec<usize>>,
    pub bin_index: Vec<usize>,
    /// bins + 1 edges spanning [0, 1].
    pub bin_edges: Vec<T>,
    pub bin_counts: Vec<usize>,
    /// Mean coverage per bin; None where the bin is empty.
    pub bin_mean_coverage: Vec<Option<T>>,
}

/// Computes kNN label coverage of `queries` against `corpus`.
pub fn knn_coverage<T: Real>(
    queries: &EmbeddingMatrix<T>,
    corpus: &EmbeddingMatrix<T>,
    labels: &[bool],
    k: usize,
    bins: usize,
) -> Result<CoverageReport<T>, AnalyticsError> {
    if queries.dim() != corpus.dim() {
        return Err(AnalyticsError::DimMismatch { query: queries.dim(), corpus: corpus.dim() });
    }
    if labels.len() != corpus.nrows() {
        return Err(AnalyticsError::LabelMismatch { labels: labels.len(), rows: corpus.nrows() });
    }
    if k == 0 || k > corpus.nrows() {
        return Err(AnalyticsError::KOutOfRange { k, n: corpus.nrows() });
    }
    if bins == 0 {
        return Err(AnalyticsError::NoBins);
    }

    let n = queries.nrows();
    let mut coverage = Vec::with_capacity(n);
    let mut neighbors = Vec::with_capacity(n);
    let mut bin_index = Vec::with_capacity(n);
    let mut bin_counts = vec![0usize; bins];
    let mut bin_sums = vec![T::zero(); bins];
    let bins_t = T::from_usize(bins).unwrap();

    for q in 0..n {
        let mut order: Vec<(T, usize)> = (0..corpus.nrows())
            .map(|i| (dist_sq(queries.row(q), corpus.row(i)), i))
            .collect();
        order.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let nearest: Vec<usize> = order[..k].iter().map(|&(_, i)| i).collect();
        let hits = nearest.iter().filter(|&&i| labels[i]).count();
        let c = T::from_usize(hits).unwrap() / T::from_usize(k).unwrap();
        let bin = ((c * bins_t).floor().to_usize().unwrap()).min(bins - 1);
        bin_counts[bin] += 1;
        bin_sums[bin] += c;
        coverage.push(c);
        neighbors.push(nearest);
        bin_index.push(bin);
    }

    let bin_edges =
        (0..=bins).map(|i| T::from_usize(i).unwrap() / bins_t).collect();
    let bin_mean_coverage = bin_counts
        .iter()
        .zip(&bin_sums)
        .map(|(&count, &sum)| {
            (count > 0).then(|| sum / T::from_usize(count).unwrap())
        })
        .collect();

    Ok(CoverageReport {
        k,
        coverage,
        neighbors,
        bin_index,
        bin_edges,
        bin_counts,
        bin_mean_coverage,
    })
}

/// Mean of a per-query 0/1 outcome inside each coverage bin; None marks an
/// empty bin rather than collapsing it to zero.
pub fn binned_accuracy<T: Real>(
    report: &CoverageReport<T>,
    outcomes: &[bool],
) -> Result<Vec<Option<T>>, AnalyticsError> {
    if outcomes.len() != report.coverage.len() {
        return Err(AnalyticsError::VectorMismatch {
            vectors: outcomes.len(),
            rows: report.coverage.len(),
        });
    }
    let bins = report.bin_counts.len();
    let mut hits = vec![0usize; bins];
    let mut totals = vec![0usize; bins];
    for (&bin, &ok) in report.bin_index.iter().zip(outcomes) {
        totals[bin] += 1;
        if ok {
            hits[bin] += 1;
        }
    }
    Ok((0..bins)
        .map(|b| {
            (totals[b] > 0)
                .then(|| T::from_usize(hits[b]).unwrap() / T::from_usize(totals[b]).unwrap())
        })
        .collect())
}
