//! Domain record types shared by every pipeline stage.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;

/// One multimodal training example.
///
/// `meta` is an open string map; stages append audit tags to it and unknown
/// input keys are preserved through it. A `BTreeMap` keeps export order
/// deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExampleRecord {
    pub id: String,
    pub source: String,
    pub images: Vec<ImageRef>,
    pub question: String,
    pub trace: String,
    pub answer: String,
    pub category: Option<String>,
    pub meta: BTreeMap<String, String>,
}

impl ExampleRecord {
    /// Unicode scalar count of question + trace + answer, the length-filter
    /// measure.
    pub fn text_len(&self) -> usize {
        self.question.chars().count() + self.trace.chars().count() + self.answer.chars().count()
    }
}

/// An image reference: the path string as written in the dataset file, the
/// location it resolved to, and the sha256 of the file bytes (lowercase hex).
/// Dedup keys use `content_hash`, never the path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRef {
    pub path: String,
    pub resolved: PathBuf,
    pub content_hash: String,
}

/// One stochastic decode attempt for a question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolloutOutcome {
    pub raw_completion: String,
    pub extracted_answer: Option<String>,
    pub correct: bool,
    /// True when the request itself failed after retries; such an outcome is
    /// always also `correct: false`.
    pub failed: bool,
}

/// Per-example rollout outcomes: k correct of n attempts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifficultyProfile {
    pub example_id: String,
    pub n: u32,
    pub k: u32,
    pub outcomes: Vec<RolloutOutcome>,
}

impl DifficultyProfile {
    /// Builds a profile from outcomes; k and n are derived, so the
    /// `k = |correct|, |outcomes| = n` invariants hold by construction.
    pub fn from_outcomes(example_id: String, outcomes: Vec<RolloutOutcome>) -> Self {
        let k = outcomes.iter().filter(|o| o.correct).count() as u32;
        let n = outcomes.len() as u32;
        Self { example_id, n, k, outcomes }
    }

    /// True when the stored k/n fields agree with the outcome list (checked
    /// when loading persisted profiles).
    pub fn consistent(&self) -> bool {
        self.n as usize == self.outcomes.len()
            && self.k == self.outcomes.iter().filter(|o| o.correct).count() as u32
            && self.outcomes.iter().all(|o| !o.failed || !o.correct)
    }
}

/// Inclusive difficulty band [k_min, k_max]. Bands from different configs may
/// overlap; each is an independent filter, not a partition cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifficultyBand {
    pub k_min: u32,
    pub k_max: u32,
}

#[derive(Debug, thiserror::Error)]
#[error("invalid difficulty band: k_min {k_min} exceeds k_max {k_max}")]
pub struct InvalidBand {
    pub k_min: u32,
    pub k_max: u32,
}

impl DifficultyBand {
    pub fn new(k_min: u32, k_max: u32) -> Result<Self, InvalidBand> {
        if k_min > k_max {
            return Err(InvalidBand { k_min, k_max });
        }
        Ok(Self { k_min, k_max })
    }

    pub fn contains(&self, k: u32) -> bool {
        self.k_min <= k && k <= self.k_max
    }
}
