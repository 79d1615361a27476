//! OpenAI-compatible HTTP gateway (`/v1/chat/completions`, `/v1/embeddings`).
//!
//! Requests are retried up to the configured attempt count with exponential
//! backoff and full jitter drawn from the seeded generator; 4xx statuses
//! other than 429 fail immediately. Only the fields the pipeline needs are
//! read from responses.

use super::{ChatRequest, ContentPart, Gateway, GatewayError};
use crate::config::CurationConfig;
use crate::seeds;
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use rand::Rng;
use serde::Deserialize;
use serde_json::json;
use std::time::Duration;

pub struct HttpGateway {
    client: reqwest::blocking::Client,
    base_url: String,
    api_key: Option<String>,
    attempts: u32,
    base_delay: Duration,
    jitter_seed: u64,
}

impl HttpGateway {
    pub fn from_config(cfg: &CurationConfig) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| GatewayError::Transport {
                endpoint: cfg.endpoint.clone(),
                detail: e.to_string(),
            })?;
        Ok(Self {
            client,
            base_url: cfg.endpoint.trim_end_matches('/').to_string(),
            api_key: (!cfg.api_key.is_empty()).then(|| cfg.api_key.clone()),
            attempts: cfg.retry_attempts.max(1),
            base_delay: Duration::from_millis(cfg.retry_base_ms),
            jitter_seed: cfg.seed,
        })
    }

    fn post_json(
        &self,
        path: &str,
        body: &serde_json::Value,
        jitter_index: u64,
    ) -> Result<serde_json::Value, GatewayError> {
        let url = format!("{}{path}", self.base_url);
        let mut rng = seeds::rng(self.jitter_seed, "retry", jitter_index);
        let mut last = GatewayError::Transport {
            endpoint: self.base_url.clone(),
            detail: "no attempt made".into(),
        };
        for attempt in 0..self.attempts {
            if attempt > 0 {
                let cap = self.base_delay.as_secs_f64() * 2f64.powi(attempt as i32 - 1);
                std::thread::sleep(Duration::from_secs_f64(cap * rng.gen::<f64>()));
            }
            let mut req = self.client.post(&url).json(body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            match req.send() {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        return resp.json().map_err(|e| GatewayError::Protocol {
                            detail: e.to_string(),
                        });
                    }
                    let retryable = status.as_u16() == 429 || status.is_server_error();
                    let detail = snippet(resp.text().unwrap_or_default());
                    let err = GatewayError::Http { status: status.as_u16(), detail };
                    if !retryable {
                        return Err(err);
                    }
                    last = err;
                }
                Err(e) => {
                    last = GatewayError::Transport {
                        endpoint: self.base_url.clone(),
                        detail: e.to_string(),
                    };
                }
            }
        }
        Err(last)
    }
}

fn snippet(text: String) -> String {
    const LIMIT: usize = 200;
    if text.chars().count() <= LIMIT {
        text
    } else {
        text.chars().take(LIMIT).collect()
    }
}

/// Message content becomes a plain string when it is a single text part,
/// otherwise the part-array form with `image_url` data URIs.
fn chat_body(request: &ChatRequest) -> serde_json::Value {
    let messages: Vec<serde_json::Value> = request
        .messages
        .iter()
        .map(|m| {
            let content = match m.parts.as_slice() {
                [ContentPart::Text(t)] => json!(t),
                parts => json!(parts
                    .iter()
                    .map(|p| match p {
                        ContentPart::Text(t) => json!({ "type": "text", "text": t }),
                        ContentPart::Image { media_type, bytes } => json!({
                            "type": "image_url",
                            "image_url": {
                                "url": format!(
                                    "data:{media_type};base64,{}",
                                    BASE64.encode(bytes)
                                )
                            }
                        }),
                    })
                    .collect::<Vec<_>>()),
            };
            json!({ "role": m.role, "content": content })
        })
        .collect();
    json!({
        "model": request.model,
        "messages": messages,
        "temperature": request.temperature,
        "top_p": request.top_p,
        "max_tokens": request.max_tokens,
    })
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedDatum>,
}

#[derive(Deserialize)]
struct EmbedDatum {
    #[serde(default)]
    index: Option<usize>,
    embedding: Vec<f64>,
}

impl Gateway for HttpGateway {
    fn chat(&self, request: &ChatRequest, seq: u64) -> Result<String, GatewayError> {
        request.validate()?;
        let value = self.post_json("/v1/chat/completions", &chat_body(request), seq)?;
        let parsed: ChatResponse = serde_json::from_value(value)
            .map_err(|e| GatewayError::Protocol { detail: e.to_string() })?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| GatewayError::Protocol { detail: "response has no choices".into() })
    }

    fn embed(&self, model: &str, inputs: &[String]) -> Result<Vec<Vec<f64>>, GatewayError> {
        let body = json!({ "model": model, "input": inputs });
        let value = self.post_json("/v1/embeddings", &body, 0)?;
        let parsed: EmbedResponse = serde_json::from_value(value)
            .map_err(|e| GatewayError::Protocol { detail: e.to_string() })?;
        if parsed.data.len() != inputs.len() {
            return Err(GatewayError::Protocol {
                detail: format!(
                    "embedding count {} does not match input count {}",
                    parsed.data.len(),
                    inputs.len()
                ),
            });
        }
        let mut data = parsed.data;
        if data.iter().all(|d| d.index.is_some()) {
            data.sort_by_key(|d| d.index.unwrap());
        }
        Ok(data.into_iter().map(|d| d.embedding).collect())
    }

    fn endpoint(&self) -> String {
        self.base_url.clone()
    }
}
