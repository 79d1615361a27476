//! Gateway to OpenAI-compatible chat-completion and embedding endpoints.
//!
//! The [`Gateway`] trait has two implementations: [`http::HttpGateway`] for a
//! real endpoint and [`mock::MockGateway`], an in-process stand-in programmed
//! by pure functions of (request content, rollout index), which the test
//! suite uses for hermetic, deterministic runs.
//!
//! Rollouts issue n separate single-completion requests (widest server
//! compatibility) with at most `max_in_flight` outstanding; outcomes are
//! merged by request index, so arrival order never affects results.

pub mod http;
pub mod mock;

use crate::answer::{extract_boxed, judge_correct};
use crate::record::{DifficultyProfile, ExampleRecord, RolloutOutcome};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

/// One part of a chat message; image bytes travel base64-encoded on the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContentPart {
    Text(String),
    Image { media_type: String, bytes: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatMessage {
    pub role: String,
    pub parts: Vec<ContentPart>,
}

impl ChatMessage {
    pub fn text(role: &str, content: impl Into<String>) -> Self {
        Self { role: role.into(), parts: vec![ContentPart::Text(content.into())] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.messages.is_empty() {
            return Err(GatewayError::InvalidRequest("no messages".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(GatewayError::InvalidRequest(format!(
                "top_p {} outside (0, 1]",
                self.top_p
            )));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }

    /// Concatenated text parts of the last user message. Mocks key their
    /// programmed behavior on this.
    pub fn last_user_text(&self) -> String {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == "user")
            .map(|m| {
                m.parts
                    .iter()
                    .filter_map(|p| match p {
                        ContentPart::Text(t) => Some(t.as_str()),
                        ContentPart::Image { .. } => None,
                    })
                    .collect::<Vec<_>>()
                    .join("\n")
            })
            .unwrap_or_default()
    }
}

/// Decode settings for one request family.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeParams {
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl DecodeParams {
    pub fn from_config(cfg: &crate::config::CurationConfig) -> Self {
        Self {
            model: cfg.chat_model.clone(),
            temperature: cfg.temperature,
            top_p: cfg.top_p,
            max_tokens: cfg.max_tokens,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("invalid chat request: {0}")]
    InvalidRequest(String),
    #[error("image {path}: {reason}")]
    Image { path: PathBuf, reason: String },
    #[error("empty embedding batch")]
    EmptyBatch,
    #[error("transport failure against {endpoint}: {detail}")]
    Transport { endpoint: String, detail: String },
    #[error("endpoint returned HTTP {status}: {detail}")]
    Http { status: u16, detail: String },
    #[error("malformed endpoint response: {detail}")]
    Protocol { detail: String },
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("endpoint {endpoint} unreachable: all {n} rollout requests failed ({detail})")]
    Unreachable { endpoint: String, n: u32, detail: String },
}

impl GatewayError {
    /// True for failures of the endpoint itself (CLI exit 3); the rest are
    /// caller/data problems (exit 2).
    pub fn is_endpoint_failure(&self) -> bool {
        matches!(
            self,
            GatewayError::Transport { .. }
                | GatewayError::Http { .. }
                | GatewayError::Protocol { .. }
                | GatewayError::DimensionMismatch { .. }
                | GatewayError::Unreachable { .. }
        )
    }
}

/// A chat + embedding endpoint. `seq` distinguishes otherwise-identical
/// requests (the rollout index); deterministic mocks key on it.
pub trait Gateway: Sync {
    fn chat(&self, request: &ChatRequest, seq: u64) -> Result<String, GatewayError>;
    fn embed(&self, model: &str, inputs: &[String]) -> Result<Vec<Vec<f64>>, GatewayError>;
    /// Human-readable endpoint name for diagnostics.
    fn endpoint(&self) -> String;
}

/// Runs `job(0..count)` with at most `max_in_flight` concurrent calls and
/// returns results in index order regardless of completion order.
pub(crate) fn fan_out<T, F>(count: usize, max_in_flight: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    if count == 0 {
        return Vec::new();
    }
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        for _ in 0..max_in_flight.clamp(1, count) {
            let tx = tx.clone();
            let next = &next;
            let job = &job;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                let out = job(i);
                if tx.send((i, out)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut slots: Vec<Option<T>> = (0..count).map(|_| None).collect();
        for (i, out) in rx {
            slots[i] = Some(out);
        }
        slots
            .into_iter()
            .map(|s| s.expect("every request index completes exactly once"))
            .collect()
    })
}

const ROLLOUT_SUFFIX: &str =
    "\n\nThink step by step. Put the final answer within \\boxed{...}.";

/// Builds the rollout request for a record: image parts first, then the
/// question with the boxed-answer instruction.
pub fn rollout_request(
    record: &ExampleRecord,
    decode: &DecodeParams,
) -> Result<ChatRequest, GatewayError> {
    let mut parts = image_parts(record)?;
    parts.push(ContentPart::Text(format!("{}{ROLLOUT_SUFFIX}", record.question)));
    let request = ChatRequest {
        model: decode.model.clone(),
        messages: vec![ChatMessage { role: "user".into(), parts }],
        temperature: decode.temperature,
        top_p: decode.top_p,
        max_tokens: decode.max_tokens,
    };
    request.validate()?;
    Ok(request)
}

fn image_parts(record: &ExampleRecord) -> Result<Vec<ContentPart>, GatewayError> {
    record
        .images
        .iter()
        .map(|img| {
            let bytes = std::fs::read(&img.resolved).map_err(|e| GatewayError::Image {
                path: img.resolved.clone(),
                reason: e.to_string(),
            })?;
            Ok(ContentPart::Image { media_type: media_type_for(&img.path), bytes })
        })
        .collect()
}

fn media_type_for(path: &str) -> String {
    let ext = path.rsplit('.').next().unwrap_or_default().to_ascii_lowercase();
    match ext.as_str() {
        "png" => "image/png",
        "jpg" | "jpeg" => "image/jpeg",
        "gif" => "image/gif",
        "webp" => "image/webp",
        _ => "application/octet-stream",
    }
    .into()
}

/// Scores one record with n independent stochastic decodes.
///
/// A request that fails after the gateway's retries becomes an outcome with
/// `failed: true, correct: false`; if every request fails the record errors
/// out instead of recording k = 0.
pub fn rollout(
    gw: &dyn Gateway,
    record: &ExampleRecord,
    n: u32,
    decode: &DecodeParams,
    max_in_flight: usize,
) -> Result<DifficultyProfile, GatewayError> {
    let request = rollout_request(record, decode)?;
    let results = fan_out(n as usize, max_in_flight, |i| gw.chat(&request, i as u64));
    let mut last_failure = None;
    let outcomes: Vec<RolloutOutcome> = results
        .into_iter()
        .map(|res| match res {
            Ok(raw) => {
                let extracted = extract_boxed(&raw);
                let correct = extracted
                    .as_deref()
                    .map_or(false, |e| judge_correct(e, &record.answer));
                RolloutOutcome { raw_completion: raw, extracted_answer: extracted, correct, failed: false }
            }
            Err(e) => {
                last_failure = Some(e.to_string());
                RolloutOutcome {
                    raw_completion: String::new(),
                    extracted_answer: None,
                    correct: false,
                    failed: true,
                }
            }
        })
        .collect();
    if n > 0 && outcomes.iter().all(|o| o.failed) {
        return Err(GatewayError::Unreachable {
            endpoint: gw.endpoint(),
            n,
            detail: last_failure.unwrap_or_default(),
        });
    }
    Ok(DifficultyProfile::from_outcomes(record.id.clone(), outcomes))
}

/// Texts are sent in chunks of this size; embeddings are all-or-nothing, so
/// any chunk failure aborts the batch.
const EMBED_CHUNK: usize = 64;

/// Embeds one text per record (row order = input order) and enforces a single
/// dimension across the batch. `text_builder` chooses what gets embedded.
pub fn embed_batch(
    gw: &dyn Gateway,
    model: &str,
    records: &[ExampleRecord],
    text_builder: impl Fn(&ExampleRecord) -> String,
) -> Result<crate::EmbeddingMatrix, GatewayError> {
    if records.is_empty() {
        return Err(GatewayError::EmptyBatch);
    }
    let texts: Vec<String> = records.iter().map(text_builder).collect();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(records.len());
    for chunk in texts.chunks(EMBED_CHUNK) {
        rows.extend(gw.embed(model, chunk)?);
    }
    let dim = rows[0].len();
    for row in &rows {
        if row.len() != dim {
            return Err(GatewayError::DimensionMismatch { expected: dim, got: row.len() });
        }
    }
    let ids = records.iter().map(|r| r.id.clone()).collect();
    crate::analytics::EmbeddingMatrix::from_rows(ids, rows)
        .map_err(|e| GatewayError::Protocol { detail: e.to_string() })
}

/// The trace-rewrite instruction, sent as the system message.
pub const REWRITE_INSTRUCTION: &str = "Rewrite a clear, step-by-step reasoning trace.\n\
Ensure the final answer is EXACTLY the given ground-truth answer.\n\
Put the final answer within \\boxed{...}.";

fn rewrite_request(
    record: &ExampleRecord,
    decode: &DecodeParams,
) -> Result<ChatRequest, GatewayError> {
    let mut parts = image_parts(record)?;
    parts.push(ContentPart::Text(format!(
        "Question:\n{}\n\nCurrent trace:\n{}\n\nGround-truth answer:\n{}",
        record.question, record.trace, record.answer
    )));
    let request = ChatRequest {
        model: decode.model.clone(),
        messages: vec![
            ChatMessage::text("system", REWRITE_INSTRUCTION),
            ChatMessage { role: "user".into(), parts },
        ],
        temperature: decode.temperature,
        top_p: decode.top_p,
        max_tokens: decode.max_tokens,
    };
    request.validate()?;
    Ok(request)
}

/// Replaces the trace with the endpoint's rewrite when the completion carries
/// a boxed answer that judges correct against the record's ground truth.
/// Otherwise the record comes back unchanged apart from a
/// `meta["rewrite"]` tag: `accepted`, `rejected`, or `error`.
pub fn rewrite_trace(
    gw: &dyn Gateway,
    record: &ExampleRecord,
    decode: &DecodeParams,
) -> ExampleRecord {
    let mut out = record.clone();
    let request = match rewrite_request(record, decode) {
        Ok(r) => r,
        Err(_) => {
            out.meta.insert("rewrite".into(), "error".into());
            return out;
        }
    };
    match gw.chat(&request, 0) {
        Ok(completion) => {
            let accepted = extract_boxed(&completion)
                .map_or(false, |boxed| judge_correct(&boxed, &record.answer));
            if accepted {
                out.trace = completion;
                out.meta.insert("rewrite".into(), "accepted".into());
            } else {
                out.meta.insert("rewrite".into(), "rejected".into());
            }
        }
        Err(_) => {
            out.meta.insert("rewrite".into(), "error".into());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::mock::MockGateway;
    use std::collections::BTreeMap;

    fn record(id: &str, question: &str, answer: &str) -> ExampleRecord {
        ExampleRecord {
            id: id.into(),
            source: "walton".into(),
            images: Vec::new(),
            question: question.into(),
            trace: "old trace".into(),
            answer: answer.into(),
            category: None,
            meta: BTreeMap::new(),
        }
    }

    #[test]
    fn request_validation_catches_bad_decode_params() {
        let mut req = ChatRequest {
            model: "m".into(),
            messages: vec![ChatMessage::text("user", "hi")],
            temperature: 0.7,
            top_p: 0.9,
            max_tokens: 16,
        };
        req.validate().unwrap();
        req.temperature = 2.5;
        assert!(req.validate().is_err());
        req.temperature = 0.7;
        req.top_p = 0.0;
        assert!(req.validate().is_err());
        req.top_p = 0.9;
        req.messages.clear();
        assert!(req.validate().is_err());
    }

    #[test]
    fn rollout_prompt_has_the_boxed_instruction() {
        let decode = DecodeParams {
            model: "m".into(),
            temperature: 0.7,
            top_p: 0.9,
            max_tokens: 128,
        };
        let req = rollout_request(&record("a", "What is 2+2?", "4"), &decode).unwrap();
        assert_eq!(
            req.last_user_text(),
            "What is 2+2?\n\nThink step by step. Put the final answer within \\boxed{...}."
        );
    }

    #[test]
    fn fan_out_places_results_by_index_for_any_width() {
        let sequential = fan_out(17, 1, |i| i * i);
        for width in [2, 3, 8, 32] {
            assert_eq!(fan_out(17, width, |i| i * i), sequential, "width {width}");
        }
        assert!(fan_out(0, 4, |i| i).is_empty());
    }

    #[test]
    fn rollout_counts_correct_answers() {
        let decode = DecodeParams {
            model: "m".into(),
            temperature: 0.7,
            top_p: 0.9,
            max_tokens: 128,
        };
        // Correct on even rollout indices only.
        let gw = MockGateway::chat_fn(|_req, seq| {
            Ok(if seq % 2 == 0 {
                "\\boxed{4}".to_string()
            } else {
                "\\boxed{5}".to_string()
            })
        });
        let profile = rollout(&gw, &record("a", "2+2?", "4"), 16, &decode, 4).unwrap();
        assert_eq!((profile.n, profile.k), (16, 8));
        assert!(profile.consistent());
        for (i, o) in profile.outcomes.iter().enumerate() {
            assert_eq!(o.correct, i % 2 == 0, "outcome {i}");
            assert!(!o.failed);
        }
    }

    #[test]
    fn rollout_is_in_flight_invariant() {
        let decode = DecodeParams {
            model: "m".into(),
            temperature: 0.7,
            top_p: 0.9,
            max_tokens: 128,
        };
        let make = || {
            MockGateway::chat_fn(|req, seq| {
                let q = req.last_user_text();
                Ok(format!("echo {} \\boxed{{{}}}", q.len(), seq % 3))
            })
        };
        let r = record("a", "2+2?", "0");
        let one = rollout(&make(), &r, 12, &decode, 1).unwrap();
        let eight = rollout(&make(), &r, 12, &decode, 8).unwrap();
        assert_eq!(one, eight);
    }

    #[test]
    fn rollout_partial_failures_are_recorded_not_raised() {
        let decode = DecodeParams {
            model: "m".into(),
            temperature: 0.7,
            top_p: 0.9,
            max_tokens: 128,
        };
        let gw = MockGateway::chat_fn(|_req, seq| {
            if seq < 4 {
                Err(GatewayError::Transport {
                    endpoint: "mock".into(),
                    detail: "boom".into(),
                })
            } else {
                Ok("\\boxed{4}".into())
            }
        });
        let profile = rollout(&gw, &record("a", "2+2?", "4"), 16, &decode, 4).unwrap();
        assert_eq!(profile.k, 12);
        assert_eq!(profile.outcomes.iter().filter(|o| o.failed).count(), 4);
        assert!(profile.outcomes[..4].iter().all(|o| o.failed && !o.correct));
    }

    #[test]
    fn rollout_with_every_request_failing_names_the_endpoint() {
        let decode = DecodeParams {
            model: "m".into(),
            temperature: 0.7,
            top_p: 0.9,
            max_tokens: 128,
        };
        let gw = MockGateway::chat_fn(|_req, _seq| {
            Err(GatewayError::Transport { endpoint: "mock".into(), detail: "down".into() })
        });
        let err = rollout(&gw, &record("a", "q", "4"), 8, &decode, 4).unwrap_err();
        match err {
            GatewayError::Unreachable { endpoint, n, .. } => {
                assert_eq!(endpoint, "mock://gateway");
                assert_eq!(n, 8);
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn mock_gateway_rollouts_are_byte_identical_across_runs() {
        let decode = DecodeParams {
            model: "m".into(),
            temperature: 0.7,
            top_p: 0.9,
            max_tokens: 128,
        };
        let make = || {
            MockGateway::chat_fn(|req, seq| {
                let h = crate::seeds::substream(17, &req.last_user_text(), seq);
                Ok(format!("thinking... \\boxed{{{}}}", h % 10))
            })
        };
        let r = record("a", "2+2?", "4");
        let p1 = rollout(&make(), &r, 16, &decode, 4).unwrap();
        let p2 = rollout(&make(), &r, 16, &decode, 4).unwrap();
        assert_eq!(
            serde_json::to_string(&p1).unwrap(),
            serde_json::to_string(&p2).unwrap()
        );
    }

    #[test]
    fn embed_batch_keeps_row_order_and_checks_dims() {
        let gw = MockGateway::embed_fn(|_model, text| {
            // Unit basis vector keyed by the trailing digit of the text.
            let idx: usize = text.chars().last().unwrap().to_digit(10).unwrap() as usize;
            let mut v = vec![0.0; 4];
            v[idx] = 1.0;
            Ok(v)
        });
        let records: Vec<ExampleRecord> =
            (0..3).map(|i| record(&format!("r{i}"), &format!("q{i}"), "1")).collect();
        let m = embed_batch(&gw, "emb", &records, |r| r.question.clone()).unwrap();
        assert_eq!(m.nrows(), 3);
        assert_eq!(m.dim(), 4);
        assert_eq!(m.row(0), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(m.row(1), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(m.row(2), &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(m.ids(), ["r0", "r1", "r2"]);
    }

    #[test]
    fn embed_batch_rejects_empty_and_mismatched() {
        let gw = MockGateway::embed_fn(|_m, _t| Ok(vec![0.0]));
        let err = embed_batch(&gw, "emb", &[], |r| r.question.clone()).unwrap_err();
        assert!(matches!(err, GatewayError::EmptyBatch));

        let gw = MockGateway::embed_fn(|_m, text| Ok(vec![0.0; 1 + text.len() % 2]));
        let records: Vec<ExampleRecord> =
            (0..2).map(|i| record(&format!("r{i}"), &"q".repeat(i + 1), "1")).collect();
        let err = embed_batch(&gw, "emb", &records, |r| r.question.clone()).unwrap_err();
        assert!(matches!(err, GatewayError::DimensionMismatch { .. }));
    }

    #[test]
    fn identical_records_embed_identically() {
        let gw = MockGateway::embed_fn(|_m, text| {
            let h = crate::seeds::substream(3, text, 0);
            Ok(vec![h as f64 / u64::MAX as f64, text.len() as f64])
        });
        let a = record("a", "same question", "1");
        let b = record("b", "same question", "1");
        let m = embed_batch(&gw, "emb", &[a, b], |r| r.question.clone()).unwrap();
        assert_eq!(m.row(0), m.row(1));
    }

    #[test]
    fn rewrite_accepts_only_matching_boxed_answers() {
        let decode = DecodeParams {
            model: "m".into(),
            temperature: 0.7,
            top_p: 0.9,
            max_tokens: 512,
        };
        let r = record("a", "q", "42");

        let good = MockGateway::chat_fn(|_req, _seq| {
            Ok("Step 1: compute. Step 2: conclude. \\boxed{42}".into())
        });
        let out = rewrite_trace(&good, &r, &decode);
        assert_eq!(out.trace, "Step 1: compute. Step 2: conclude. \\boxed{42}");
        assert_eq!(out.meta.get("rewrite").unwrap(), "accepted");
        assert_eq!((out.id, out.question, out.answer), (r.id.clone(), r.question.clone(), r.answer.clone()));

        let wrong = MockGateway::chat_fn(|_req, _seq| Ok("\\boxed{41}".into()));
        let out = rewrite_trace(&wrong, &r, &decode);
        assert_eq!(out.trace, r.trace);
        assert_eq!(out.meta.get("rewrite").unwrap(), "rejected");

        let unboxed = MockGateway::chat_fn(|_req, _seq| Ok("the answer is 42".into()));
        let out = rewrite_trace(&unboxed, &r, &decode);
        assert_eq!(out.trace, r.trace);
        assert_eq!(out.meta.get("rewrite").unwrap(), "rejected");

        let down = MockGateway::chat_fn(|_req, _seq| {
            Err(GatewayError::Transport { endpoint: "mock".into(), detail: "down".into() })
        });
        let out = rewrite_trace(&down, &r, &decode);
        assert_eq!(out.trace, r.trace);
        assert_eq!(out.meta.get("rewrite").unwrap(), "error");
    }

    #[test]
    fn rewrite_never_touches_identity_fields() {
        let decode = DecodeParams {
            model: "m".into(),
            temperature: 0.7,
            top_p: 0.9,
            max_tokens: 512,
        };
        let r = record("id-9", "question text", "7");
        let gw = MockGateway::chat_fn(|_req, _seq| Ok("\\boxed{7}".into()));
        let out = rewrite_trace(&gw, &r, &decode);
        assert_eq!(out.id, r.id);
        assert_eq!(out.question, r.question);
        assert_eq!(out.images, r.images);
        assert_eq!(out.answer, r.answer);
        assert_eq!(out.source, r.source);
        assert_eq!(out.category, r.category);
    }

    #[test]
    fn rewrite_system_message_is_the_three_line_instruction() {
        let r = record("a", "q", "42");
        let decode = DecodeParams {
            model: "m".into(),
            temperature: 0.7,
            top_p: 0.9,
            max_tokens: 512,
        };
        let req = rewrite_request(&r, &decode).unwrap();
        assert_eq!(req.messages[0].role, "system");
        let ContentPart::Text(sys) = &req.messages[0].parts[0] else {
            panic!("system message must be text")
        };
        assert_eq!(sys.lines().count(), 3);
        assert_eq!(sys, REWRITE_INSTRUCTION);
        let user = req.last_user_text();
        assert!(user.contains("Question:\nq"));
        assert!(user.contains("Ground-truth answer:\n42"));
    }

    #[test]
    fn media_types_follow_extensions() {
        assert_eq!(media_type_for("a/b.png"), "image/png");
        assert_eq!(media_type_for("x.JPG"), "image/jpeg");
        assert_eq!(media_type_for("x.jpeg"), "image/jpeg");
        assert_eq!(media_type_for("noext"), "application/octet-stream");
    }
}
