//! Deterministic curation of reasoning-tuning corpora.
//!
//! The pipeline is a pure function of (input data, configuration): rollout
//! difficulty scoring, band filtering, embedding diagnostics, clustered
//! diversity selection, category balancing, ratio mixing, and budgeted final
//! assembly. Every stage draws randomness from a named substream of one run
//! seed, so reordering stages never perturbs another stage's draws and every
//! output file is byte-reproducible.
//!
//! Numeric kernels (`analytics`, `variates`) are generic over [`scalar::Real`]
//! so they can run in `f32` or `f64`; the aliases at the crate root pin the
//! `f64` instantiations used by the CLI and the on-disk formats.

pub mod analytics;
pub mod answer;
pub mod config;
pub mod dataset;
pub mod difficulty;
pub mod gateway;
pub mod plan;
pub mod record;
pub mod report;
pub mod scalar;
pub mod seeds;
pub mod select;
pub mod stats;
pub mod variates;

/// Row-major embedding matrix over `f64`, the CLI's working scalar.
pub type EmbeddingMatrix = analytics::EmbeddingMatrix<f64>;
/// k-means model over `f64`.
pub type ClusterModel = analytics::ClusterModel<f64>;
/// kNN coverage report over `f64`.
pub type CoverageReport = analytics::CoverageReport<f64>;
/// PCA projection output over `f64`.
pub type PcaOutput = analytics::PcaOutput<f64>;
