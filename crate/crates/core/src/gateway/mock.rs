//! In-process gateway stand-in for hermetic tests.
//!
//! Behavior is programmed with plain closures. Kept deterministic by
//! convention: closures should be pure functions of (request content,
//! rollout index), typically keyed on [`ChatRequest::last_user_text`] plus
//! the `seq` argument.

use super::{ChatRequest, Gateway, GatewayError};
use std::sync::atomic::{AtomicU64, Ordering};

type ChatFn = dyn Fn(&ChatRequest, u64) -> Result<String, GatewayError> + Send + Sync;
type EmbedFn = dyn Fn(&str, &str) -> Result<Vec<f64>, GatewayError> + Send + Sync;

pub struct MockGateway {
    chat: Box<ChatFn>,
    embed: Box<EmbedFn>,
    chat_calls: AtomicU64,
    embed_calls: AtomicU64,
}

impl MockGateway {
    /// Full mock: `chat` sees (request, rollout index); `embed` is invoked
    /// once per input text with (model, text).
    pub fn new(
        chat: impl Fn(&ChatRequest, u64) -> Result<String, GatewayError> + Send + Sync + 'static,
        embed: impl Fn(&str, &str) -> Result<Vec<f64>, GatewayError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            chat: Box::new(chat),
            embed: Box::new(embed),
            chat_calls: AtomicU64::new(0),
            embed_calls: AtomicU64::new(0),
        }
    }

    /// Chat-only mock; embedding calls fail loudly.
    pub fn chat_fn(
        chat: impl Fn(&ChatRequest, u64) -> Result<String, GatewayError> + Send + Sync + 'static,
    ) -> Self {
        Self::new(chat, |_, _| {
            Err(GatewayError::Protocol { detail: "mock has no embedder".into() })
        })
    }

    /// Embed-only mock; chat calls fail loudly.
    pub fn embed_fn(
        embed: impl Fn(&str, &str) -> Result<Vec<f64>, GatewayError> + Send + Sync + 'static,
    ) -> Self {
        Self::new(
            |_, _| Err(GatewayError::Protocol { detail: "mock has no chat".into() }),
            embed,
        )
    }

    /// Total chat requests observed (resumability tests count these).
    pub fn chat_calls(&self) -> u64 {
        self.chat_calls.load(Ordering::Relaxed)
    }

    pub fn embed_calls(&self) -> u64 {
        self.embed_calls.load(Ordering::Relaxed)
    }
}

impl Gateway for MockGateway {
    fn chat(&self, request: &ChatRequest, seq: u64) -> Result<String, GatewayError> {
        self.chat_calls.fetch_add(1, Ordering::Relaxed);
        request.validate()?;
        (self.chat)(request, seq)
    }

    fn embed(&self, model: &str, inputs: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        self.embed_calls.fetch_add(inputs.len() as u64, Ordering::Relaxed);
        inputs.iter().map(|text| (self.embed)(model, text)).collect()
    }

    fn endpoint(&self) -> String {
        "mock://gateway".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ChatMessage;

    fn request(text: &str) -> ChatRequest {
        ChatRequest {
            model: "m".into(),
            messages: vec![ChatMessage::text("user", text)],
            temperature: 0.7,
            top_p: 0.9,
            max_tokens: 8,
        }
    }

    #[test]
    fn mock_is_a_pure_function_of_content_and_index() {
        let gw = MockGateway::chat_fn(|req, seq| Ok(format!("{}#{seq}", req.last_user_text())));
        assert_eq!(gw.chat(&request("q"), 0).unwrap(), "q#0");
        assert_eq!(gw.chat(&request("q"), 1).unwrap(), "q#1");
        assert_eq!(gw.chat(&request("q"), 0).unwrap(), "q#0");
        assert_eq!(gw.chat_calls(), 3);
    }

    #[test]
    fn mock_validates_requests_like_a_real_endpoint() {
        let gw = MockGateway::chat_fn(|_, _| Ok("ok".into()));
        let mut bad = request("q");
        bad.top_p = 7.0;
        assert!(gw.chat(&bad, 0).is_err());
    }

    #[test]
    fn embed_counts_per_input() {
        let gw = MockGateway::embed_fn(|_, t| Ok(vec![t.len() as f64]));
        let out = gw.embed("m", &["a".into(), "bb".into()]).unwrap();
        assert_eq!(out, vec![vec![1.0], vec![2.0]]);
        assert_eq!(gw.embed_calls(), 2);
    }
}
