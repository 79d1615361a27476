//! Difficulty scoring orchestration, band filtering, and uniform sampling.
//!
//! Scores persist to a JSON-lines sidecar next to the dataset as they are
//! computed, so an interrupted run resumes without re-issuing requests.
//! Cache entries are keyed by (example id, n, temperature, top_p, model):
//! changing any decode parameter invalidates them.

use crate::dataset::Dataset;
use crate::gateway::{rollout, DecodeParams, Gateway, GatewayError};
use crate::record::{DifficultyBand, DifficultyProfile, RolloutOutcome};
use crate::seeds;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

/// Decode parameters a difficulty table was computed under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreParams {
    pub model: String,
    pub n: u32,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub max_in_flight: usize,
}

impl ScoreParams {
    pub fn from_config(cfg: &crate::config::CurationConfig) -> Self {
        Self {
            model: cfg.chat_model.clone(),
            n: cfg.rollouts,
            temperature: cfg.temperature,
            top_p: cfg.top_p,
            max_tokens: cfg.max_tokens,
            max_in_flight: cfg.max_in_flight,
        }
    }

    fn decode(&self) -> DecodeParams {
        DecodeParams {
            model: self.model.clone(),
            temperature: self.temperature,
            top_p: self.top_p,
            max_tokens: self.max_tokens,
        }
    }

    /// Cache-key fields. Float equality is exact: values round-trip through
    /// JSON unchanged.
    fn matches_line(&self, line: &SidecarLine) -> bool {
        self.model == line.model
            && self.n == line.n
            && self.temperature == line.temperature
            && self.top_p == line.top_p
    }
}

#[derive(Debug, Clone)]
pub struct DifficultyTable {
    pub profiles: BTreeMap<String, DifficultyProfile>,
    pub params: ScoreParams,
}

impl DifficultyTable {
    pub fn k_of(&self, id: &str) -> Option<u32> {
        self.profiles.get(id).map(|p| p.k)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DifficultyError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: corrupt sidecar entry: {reason}")]
    Sidecar { path: PathBuf, line: usize, reason: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("record \"{id}\" has no difficulty profile")]
    MissingProfile { id: String },
    #[error("cannot sample {requested} of {available} records")]
    SampleTooLarge { requested: usize, available: usize },
}

/// Sidecar location for a dataset file: `data.jsonl` → `data.difficulty.jsonl`.
pub fn sidecar_path(dataset_path: &Path) -> PathBuf {
    let stem = dataset_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    dataset_path.with_file_name(format!("{stem}.difficulty.jsonl"))
}

/// One persisted profile plus the decode parameters it was scored under.
#[derive(Serialize, Deserialize)]
struct SidecarLine {
    example_id: String,
    n: u32,
    k: u32,
    temperature: f64,
    top_p: f64,
    model: String,
    outcomes: Vec<RolloutOutcome>,
}

fn load_sidecar(
    path: &Path,
    params: &ScoreParams,
) -> Result<BTreeMap<String, DifficultyProfile>, DifficultyError> {
    let mut cached = BTreeMap::new();
    if !path.exists() {
        return Ok(cached);
    }
    let file = std::fs::File::open(path).map_err(|source| DifficultyError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|source| DifficultyError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: SidecarLine =
            serde_json::from_str(&line).map_err(|e| DifficultyError::Sidecar {
                path: path.to_path_buf(),
                line: lineno,
                reason: e.to_string(),
            })?;
        if !params.matches_line(&entry) {
            // Scored under different decode parameters; not usable here.
            continue;
        }
        let profile = DifficultyProfile {
            example_id: entry.example_id.clone(),
            n: entry.n,
            k: entry.k,
            outcomes: entry.outcomes,
        };
        if !profile.consistent() {
            return Err(DifficultyError::Sidecar {
                path: path.to_path_buf(),
                line: lineno,
                reason: "stored k/n disagree with outcomes".into(),
            });
        }
        cached.insert(entry.example_id, profile);
    }
    Ok(cached)
}

/// Loads previously scored profiles without touching a gateway. Entries
/// scored under different decode parameters are ignored.
pub fn load_table(
    sidecar: &Path,
    params: &ScoreParams,
) -> Result<DifficultyTable, DifficultyError> {
    Ok(DifficultyTable { profiles: load_sidecar(sidecar, params)?, params: params.clone() })
}

fn append_sidecar(
    path: &Path,
    params: &ScoreParams,
    profile: &DifficultyProfile,
) -> Result<(), DifficultyError> {
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|source| DifficultyError::Io { path: path.to_path_buf(), source })?;
    let line = SidecarLine {
        example_id: profile.example_id.clone(),
        n: profile.n,
        k: profile.k,
        temperature: params.temperature,
        top_p: params.top_p,
        model: params.model.clone(),
        outcomes: profile.outcomes.clone(),
    };
    let mut text = serde_json::to_string(&line).expect("sidecar line serializes");
    text.push('\n');
    // One write + flush per profile keeps a partial sidecar intact on abort.
    file.write_all(text.as_bytes())
        .and_then(|_| file.flush())
        .map_err(|source| DifficultyError::Io { path: path.to_path_buf(), source })
}

/// Scores every record, skipping ids already in the sidecar. A gateway hard
/// error aborts the run; profiles computed before the abort are already
/// persisted.
pub fn score_dataset(
    ds: &Dataset,
    gw: &dyn Gateway,
    params: &ScoreParams,
    sidecar: &Path,
) -> Result<DifficultyTable, DifficultyError> {
    let mut profiles = load_sidecar(sidecar, params)?;
    for record in &ds.records {
        if profiles.contains_key(&record.id) {
            continue;
        }
        let profile = rollout(gw, record, params.n, &params.decode(), params.max_in_flight)?;
        append_sidecar(sidecar, params, &profile)?;
        profiles.insert(record.id.clone(), profile);
    }
    // Drop cached entries for records not in this dataset.
    let ids: std::collections::HashSet<&str> =
        ds.records.iter().map(|r| r.id.as_str()).collect();
    profiles.retain(|id, _| ids.contains(id.as_str()));
    Ok(DifficultyTable { profiles, params: params.clone() })
}

/// Keeps records whose k falls inside the band; order preserved. Every
/// record must have a profile.
pub fn filter_band(
    ds: &Dataset,
    table: &DifficultyTable,
    band: DifficultyBand,
) -> Result<Dataset, DifficultyError> {
    let mut records = Vec::new();
    for r in &ds.records {
        let k = table
            .k_of(&r.id)
            .ok_or_else(|| DifficultyError::MissingProfile { id: r.id.clone() })?;
        if band.contains(k) {
            records.push(r.clone());
        }
    }
    Ok(Dataset { records, provenance: ds.provenance.clone() })
}

/// Uniform sample of m records without replacement, original order
/// preserved. Seeded: the same (seed, dataset) always selects the same ids.
pub fn sample_uniform(ds: &Dataset, m: usize, seed: u64) -> Result<Dataset, DifficultyError> {
    if m > ds.len() {
        return Err(DifficultyError::SampleTooLarge { requested: m, available: ds.len() });
    }
    let mut rng = seeds::rng(seed, "uniform", 0);
    let picked = seeds::sample_indices(&mut rng, ds.len(), m);
    let records = picked.into_iter().map(|i| ds.records[i].clone()).collect();
    Ok(Dataset { records, provenance: ds.provenance.clone() })
}
