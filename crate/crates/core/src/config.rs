//! Run configuration: one flat TOML document per run.
//!
//! The pipeline is a pure function of (input data, config), so the config
//! file is the reproducibility record. Environment variables override only
//! the endpoint URL and API key (`CURATE_ENDPOINT`, `CURATE_API_KEY`);
//! everything else must live in the file.

use crate::record::DifficultyBand;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurationConfig {
    pub seed: u64,
    /// Final dataset size cap.
    pub budget: usize,
    /// Rollouts per example (n).
    pub rollouts: u32,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    /// Difficulty band, inclusive on both ends.
    pub band_k_min: u32,
    pub band_k_max: u32,
    /// Source mixing weights; ratios are normalized internally.
    pub mixture: Vec<MixtureComponent>,
    pub cluster_count: usize,
    /// Absolute per-cluster sample cap.
    pub per_cluster_cap: usize,
    /// Optional fractional cap in (0, 1]; when set it overrides
    /// `per_cluster_cap` and resolves to floor(fraction * cluster size)
    /// before allocation.
    pub per_cluster_cap_fraction: Option<f64>,
    /// Dirichlet concentration scale; `inf` selects the deterministic limit
    /// where sampled proportions equal the sqrt-size weights exactly.
    pub dirichlet_tau: f64,
    pub knn_k: usize,
    pub coverage_bins: usize,
    pub length_limit_chars: usize,
    /// Bound on outstanding gateway requests.
    pub max_in_flight: usize,
    pub endpoint: String,
    /// Empty string means no Authorization header.
    pub api_key: String,
    pub chat_model: String,
    pub embedding_model: String,
    pub retry_attempts: u32,
    pub retry_base_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub source: String,
    pub ratio: f64,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            budget: 10_000,
            rollouts: 16,
            temperature: 0.7,
            top_p: 0.9,
            max_tokens: 2048,
            band_k_min: 0,
            band_k_max: 8,
            mixture: Vec::new(),
            cluster_count: 64,
            per_cluster_cap: 256,
            per_cluster_cap_fraction: None,
            dirichlet_tau: f64::INFINITY,
            knn_k: 32,
            coverage_bins: 10,
            length_limit_chars: 8192,
            max_in_flight: 8,
            endpoint: "http://127.0.0.1:8000".into(),
            api_key: String::new(),
            chat_model: "qwen2.5-vl-7b-instruct".into(),
            embedding_model: "qwen2.5-vl-7b-instruct".into(),
            retry_attempts: 3,
            retry_base_ms: 500,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("config field {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

impl CurationConfig {
    /// Reads and validates a TOML config, then applies the environment
    /// overrides.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: CurationConfig =
            toml::from_str(&text).map_err(|e| ConfigError::Parse {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        cfg.apply_env_overrides();
        cfg.validate()?;
        Ok(cfg)
    }

    /// `CURATE_ENDPOINT` and `CURATE_API_KEY` are the only recognized
    /// overrides; reproducibility requires every other knob to be in the
    /// config artifact.
    pub fn apply_env_overrides(&mut self) {
        if let Ok(v) = std::env::var("CURATE_ENDPOINT") {
            self.endpoint = v;
        }
        if let Ok(v) = std::env::var("CURATE_API_KEY") {
            self.api_key = v;
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn bad(field: &'static str, reason: impl Into<String>) -> ConfigError {
            ConfigError::Invalid { field, reason: reason.into() }
        }
        if self.budget < 1 {
            return Err(bad("budget", "must be at least 1"));
        }
        if self.rollouts < 1 {
            return Err(bad("rollouts", "must be at least 1"));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(bad("temperature", "must lie in [0, 2]"));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(bad("top_p", "must lie in (0, 1]"));
        }
        if self.band_k_min > self.band_k_max {
            return Err(bad("band_k_min", "exceeds band_k_max"));
        }
        if self.band_k_max > self.rollouts {
            return Err(bad("band_k_max", "exceeds rollout count"));
        }
        for (i, m) in self.mixture.iter().enumerate() {
            if !(m.ratio > 0.0 && m.ratio.is_finite()) {
                return Err(bad("mixture", format!("component {i} ratio must be positive")));
            }
        }
        if self.cluster_count < 1 {
            return Err(bad("cluster_count", "must be at least 1"));
        }
        if let Some(f) = self.per_cluster_cap_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(bad("per_cluster_cap_fraction", "must lie in (0, 1]"));
            }
        }
        if !(self.dirichlet_tau > 0.0) {
            return Err(bad("dirichlet_tau", "must be positive (inf allowed)"));
        }
        if self.knn_k < 1 {
            return Err(bad("knn_k", "must be at least 1"));
        }
        if self.coverage_bins < 1 {
            return Err(bad("coverage_bins", "must be at least 1"));
        }
        if self.length_limit_chars < 1 {
            return Err(bad("length_limit_chars", "must be at least 1"));
        }
        if self.max_in_flight < 1 {
            return Err(bad("max_in_flight", "must be at least 1"));
        }
        if self.retry_attempts < 1 {
            return Err(bad("retry_attempts", "must be at least 1"));
        }
        Ok(())
    }

    pub fn band(&self) -> DifficultyBand {
        DifficultyBand { k_min: self.band_k_min, k_max: self.band_k_max }
    }

    /// Resolves per-cluster caps to absolute counts for the given cluster
    /// sizes.
    pub fn resolve_caps(&self, sizes: &[usize]) -> Vec<usize> {
        match self.per_cluster_cap_fraction {
            Some(f) => sizes.iter().map(|&s| (f * s as f64).floor() as usize).collect(),
            None => vec![self.per_cluster_cap; sizes.len()],
        }
    }
}
