//! Numerical diagnostics: PCA projection, k-means clustering, kNN coverage.
//!
//! Everything here is a pure function over an [`EmbeddingMatrix`], generic in
//! the scalar type. Reductions run in fixed index order, so results are
//! bit-reproducible for a given scalar width.

mod kmeans;
mod knn;
mod pca;

pub use kmeans::{kmeans, ClusterModel, KmeansParams};
pub use knn::{binned_accuracy, knn_coverage, CoverageReport};
pub use pca::{pca_project, PcaOutput};

use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum AnalyticsError {
    #[error("embedding matrix needs at least one row")]
    Empty,
    #[error("row {row} has {got} entries, expected {expected}")]
    RaggedRow { row: usize, expected: usize, got: usize },
    #[error("non-finite value in row {row}")]
    NonFinite { row: usize },
    #[error("duplicate id \"{id}\" in embedding matrix")]
    DuplicateId { id: String },
    #[error("id count {ids} does not match row count {rows}")]
    IdMismatch { ids: usize, rows: usize },
    #[error("out_dim {out_dim} exceeds min(rows, dim) = {limit}")]
    OutDimTooLarge { out_dim: usize, limit: usize },
    #[error("PCA needs at least 2 rows, got {rows}")]
    TooFewRows { rows: usize },
    #[error("k = {k} outside [1, {n}]")]
    KOutOfRange { k: usize, n: usize },
    #[error("query dim {query} does not match corpus dim {corpus}")]
    DimMismatch { query: usize, corpus: usize },
    #[error("label count {labels} does not match corpus rows {rows}")]
    LabelMismatch { labels: usize, rows: usize },
    #[error("vector count {vectors} does not match query rows {rows}")]
    VectorMismatch { vectors: usize, rows: usize },
    #[error("bin count must be at least 1")]
    NoBins,
    #[error("{path}: {reason}")]
    Cache { path: PathBuf, reason: String },
}

/// Dense row-major N×d matrix with one id per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix<T> {
    ids: Vec<String>,
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> EmbeddingMatrix<T> {
    pub fn from_rows(ids: Vec<String>, rows: Vec<Vec<T>>) -> Result<Self, AnalyticsError> {
        if rows.is_empty() {
            return Err(AnalyticsError::Empty);
        }
        if ids.len() != rows.len() {
            return Err(AnalyticsError::IdMismatch { ids: ids.len(), rows: rows.len() });
        }
        let dim = rows[0].len();
        let mut seen = HashSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(AnalyticsError::DuplicateId { id: id.clone() });
            }
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(AnalyticsError::RaggedRow { row: i, expected: dim, got: row.len() });
            }
            if row.iter().any(|x| !x.is_finite()) {
                return Err(AnalyticsError::NonFinite { row: i });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { ids, dim, data })
    }

    pub fn nrows(&self) -> usize {
        self.ids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Per-column means (the centroid of all rows).
    pub fn column_means(&self) -> Vec<T> {
        let n = T::from_usize(self.nrows()).unwrap();
        let mut means = vec![T::zero(); self.dim];
        for i in 0..self.nrows() {
            for (m, x) in means.iter_mut().zip(self.row(i)) {
                *m += *x;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        means
    }
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    id: String,
    vector: Vec<f64>,
}

/// Cache sidecar location: `data.jsonl` → `data.embeddings`.
pub fn cache_path(dataset_path: &Path) -> PathBuf {
    let stem = dataset_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    dataset_path.with_file_name(format!("{stem}.embeddings"))
}

impl<T: Real> EmbeddingMatrix<T> {
    /// Writes the id → vector cache as JSON-lines (vectors stored as f64).
    pub fn write_cache(&self, path: &Path) -> Result<(), AnalyticsError> {
        let file = std::fs::File::create(path).map_err(|e| AnalyticsError::Cache {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let mut w = BufWriter::new(file);
        for i in 0..self.nrows() {
            let line = CacheLine {
                id: self.ids[i].clone(),
                vector: self.row(i).iter().map(|x| x.to_f64().unwrap()).collect(),
            };
            serde_json::to_writer(&mut w, &line)
                .map_err(|e| AnalyticsError::Cache {
                    path: path.to_path_buf(),
                    reason: e.to_string(),
                })?;
            w.write_all(b"\n").map_err(|e| AnalyticsError::Cache {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
        }
        w.flush().map_err(|e| AnalyticsError::Cache {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn read_cache(path: &Path) -> Result<Self, AnalyticsError> {
        let file = std::fs::File::open(path).map_err(|e| AnalyticsError::Cache {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| AnalyticsError::Cache {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: CacheLine =
                serde_json::from_str(&line).map_err(|e| AnalyticsError::Cache {
                    path: path.to_path_buf(),
                    reason: format!("line {}: {e}", i + 1),
                })?;
            ids.push(entry.id);
            rows.push(entry.vector.into_iter().map(T::of).collect());
        }
        Self::from_rows(ids, rows)
    }
}

/// Squared Euclidean distance; fixed index order, no fused reductions.
pub(crate) fn dist_sq<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        let d = *x - *y;
        acc += d * d;
    }
    acc
}
