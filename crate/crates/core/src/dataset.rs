//! Dataset ingestion, validation, deduplication, length filtering, and
//! bit-exact export.
//!
//! Wire format: UTF-8 JSON-lines, one object per line, keys in the fixed
//! order `{id, source, images, question, trace, answer, category?, meta?}`.
//! `images` holds path strings resolved against the dataset file's directory
//! at ingest time. Unknown keys are folded into `meta` (non-string values as
//! compact JSON) and re-emitted on export.

use crate::answer::normalize_answer;
use crate::record::{ExampleRecord, ImageRef};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    /// Record order is stable: file order at ingest, preserved by every
    /// order-preserving stage.
    pub records: Vec<ExampleRecord>,
    pub provenance: Vec<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Malformed { path: PathBuf, line: usize, reason: String },
    #[error("{path}: duplicate id \"{id}\" on lines {first} and {second}")]
    DuplicateId { path: PathBuf, id: String, first: usize, second: usize },
    #[error("record \"{id}\": image \"{image}\" does not resolve ({reason})")]
    MissingImage { id: String, image: String, reason: String },
}

impl Dataset {
    pub fn new(records: Vec<ExampleRecord>) -> Self {
        Self { records, provenance: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.id.as_str()).collect()
    }

    /// Same records, new provenance trail appended.
    pub(crate) fn derived(&self, records: Vec<ExampleRecord>) -> Dataset {
        Dataset { records, provenance: self.provenance.clone() }
    }
}

/// Reads a JSON-lines dataset. Blank lines are skipped; any other unparsable
/// line fails with its 1-based line number. Image references are resolved
/// against the file's directory and content-hashed.
pub fn ingest(path: &Path) -> Result<Dataset, DataError> {
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut records = Vec::new();
    let mut first_line_of: HashMap<String, usize> = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_line(&line, dir).map_err(|reason| DataError::Malformed {
            path: path.to_path_buf(),
            line: lineno,
            reason,
        })?;
        let record = match record {
            Parsed::Ok(r) => r,
            Parsed::BadImage { id, image, reason } => {
                return Err(DataError::MissingImage { id, image, reason })
            }
        };
        if let Some(&first) = first_line_of.get(&record.id) {
            return Err(DataError::DuplicateId {
                path: path.to_path_buf(),
                id: record.id,
                first,
                second: lineno,
            });
        }
        first_line_of.insert(record.id.clone(), lineno);
        records.push(record);
    }
    Ok(Dataset { records, provenance: vec![path.to_path_buf()] })
}

enum Parsed {
    Ok(ExampleRecord),
    BadImage { id: String, image: String, reason: String },
}

fn parse_line(line: &str, dir: &Path) -> Result<Parsed, String> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| format!("not a JSON object: {e}"))?;
    let serde_json::Value::Object(mut obj) = value else {
        return Err("line is valid JSON but not an object".into());
    };

    let id = take_string(&mut obj, "id")?.ok_or("missing \"id\"")?;
    if id.is_empty() {
        return Err("\"id\" must be non-empty".into());
    }
    let source = take_string(&mut obj, "source")?.unwrap_or_default();
    let question = take_string(&mut obj, "question")?.unwrap_or_default();
    let trace = take_string(&mut obj, "trace")?.unwrap_or_default();
    let answer = take_string(&mut obj, "answer")?.ok_or("missing \"answer\"")?;
    if answer.is_empty() {
        return Err("\"answer\" must be non-empty".into());
    }
    let category = take_string(&mut obj, "category")?;

    let mut images = Vec::new();
    if let Some(v) = obj.remove("images") {
        let serde_json::Value::Array(items) = v else {
            return Err("\"images\" must be an array of path strings".into());
        };
        for item in items {
            let serde_json::Value::String(p) = item else {
                return Err("\"images\" must be an array of path strings".into());
            };
            let resolved = if Path::new(&p).is_absolute() {
                PathBuf::from(&p)
            } else {
                dir.join(&p)
            };
            match std::fs::read(&resolved) {
                Ok(bytes) => images.push(ImageRef {
                    path: p,
                    resolved,
                    content_hash: hex_sha256(&bytes),
                }),
                Err(e) => {
                    return Ok(Parsed::BadImage { id, image: p, reason: e.to_string() })
                }
            }
        }
    }

    let mut meta: BTreeMap<String, String> = BTreeMap::new();
    if let Some(v) = obj.remove("meta") {
        let serde_json::Value::Object(entries) = v else {
            return Err("\"meta\" must be an object".into());
        };
        for (k, v) in entries {
            meta.insert(k, stringify(v));
        }
    }
    // Unknown top-level keys are preserved through meta.
    for (k, v) in obj {
        meta.insert(k, stringify(v));
    }

    Ok(Parsed::Ok(ExampleRecord {
        id,
        source,
        images,
        question,
        trace,
        answer,
        category,
        meta,
    }))
}

fn take_string(
    obj: &mut serde_json::Map<String, serde_json::Value>,
    key: &str,
) -> Result<Option<String>, String> {
    match obj.remove(key) {
        None | Some(serde_json::Value::Null) => Ok(None),
        Some(serde_json::Value::String(s)) => Ok(Some(s)),
        Some(_) => Err(format!("\"{key}\" must be a string")),
    }
}

fn stringify(v: serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s,
        other => other.to_string(),
    }
}

fn hex_sha256(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Removes records whose dedup key repeats, keeping the first occurrence.
/// The key is (normalized question, normalized answer, ordered image content
/// hashes): identical images under different filenames still collide.
pub fn dedup(ds: &Dataset) -> Dataset {
    let mut seen: HashSet<(String, String, Vec<String>)> = HashSet::new();
    let records = ds
        .records
        .iter()
        .filter(|r| {
            let key = (
                normalize_answer(&r.question),
                normalize_answer(&r.answer),
                r.images.iter().map(|i| i.content_hash.clone()).collect(),
            );
            seen.insert(key)
        })
        .cloned()
        .collect();
    ds.derived(records)
}

/// Drops records whose question + trace + answer exceed `limit_chars` Unicode
/// scalar values. The bound is inclusive.
pub fn length_filter(ds: &Dataset, limit_chars: usize) -> Dataset {
    let records = ds
        .records
        .iter()
        .filter(|r| r.text_len() <= limit_chars)
        .cloned()
        .collect();
    ds.derived(records)
}

#[derive(Serialize)]
struct WireRecord<'a> {
    id: &'a str,
    source: &'a str,
    images: Vec<&'a str>,
    question: &'a str,
    trace: &'a str,
    answer: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    category: Option<&'a str>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    meta: &'a BTreeMap<String, String>,
}

/// Writes the dataset as JSON-lines with the fixed key order, UTF-8, LF
/// endings. `ingest(export(ds))` reproduces `ds` record-for-record.
pub fn export(ds: &Dataset, path: &Path) -> Result<(), DataError> {
    let file = std::fs::File::create(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    let io_err = |source| DataError::Io { path: path.to_path_buf(), source };
    for r in &ds.records {
        let wire = WireRecord {
            id: &r.id,
            source: &r.source,
            images: r.images.iter().map(|i| i.path.as_str()).collect(),
            question: &r.question,
            trace: &r.trace,
            answer: &r.answer,
            category: r.category.as_deref(),
            meta: &r.meta,
        };
        let line = serde_json::to_string(&wire).expect("record serializes");
        w.write_all(line.as_bytes()).map_err(io_err)?;
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}
