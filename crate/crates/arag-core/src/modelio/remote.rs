//! Chat-completion HTTP backend.
//!
//! Speaks the common `/chat/completions` shape: messages in, first choice's
//! message content out. The credential is read from the environment, never
//! from configuration, so run artifacts stay shareable.

use super::{GenerationRequest, GenerationResponse, ModelClient, ModelError};
use serde_json::{json, Value};
use std::time::Duration;

/// Environment variable holding the bearer token for remote backends.
pub const API_KEY_ENV: &str = "ARAG_API_KEY";

pub struct RemoteClient {
    http: reqwest::blocking::Client,
    endpoint: String,
    api_key: Option<String>,
}

impl RemoteClient {
    /// Build a client for `base_url`, reading the credential from
    /// [`API_KEY_ENV`]. A missing credential surfaces as an authentication
    /// error on the first generate call.
    pub fn new(base_url: &str) -> Self {
        Self::with_api_key(base_url, std::env::var(API_KEY_ENV).ok())
    }

    pub fn with_api_key(base_url: &str, api_key: Option<String>) -> Self {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .expect("http client builds");
        Self {
            http,
            endpoint: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            api_key,
        }
    }
}

fn build_body(request: &GenerationRequest) -> Value {
    let mut messages = Vec::new();
    if let Some(system) = &request.system_prompt {
        messages.push(json!({"role": "system", "content": system}));
    }
    messages.push(json!({"role": "user", "content": request.user_prompt}));
    json!({
        "model": request.model_id,
        "messages": messages,
        "temperature": request.params.temperature,
        "top_p": request.params.top_p,
        "max_tokens": request.params.max_tokens,
    })
}

/// Pull the first choice's message content out of a chat-completion reply.
fn parse_reply(body: &Value) -> Result<String, ModelError> {
    body.get("choices")
        .and_then(|c| c.get(0))
        .and_then(|c| c.get("message"))
        .and_then(|m| m.get("content"))
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| {
            ModelError::MalformedReply(format!(
                "reply lacks choices[0].message.content: {body}"
            ))
        })
}

impl ModelClient for RemoteClient {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, ModelError> {
        let api_key = self.api_key.as_ref().ok_or_else(|| {
            ModelError::Auth(format!("no credential; set {API_KEY_ENV}"))
        })?;

        let response = self
            .http
            .post(&self.endpoint)
            .bearer_auth(api_key)
            .json(&build_body(request))
            .send()
            .map_err(|e| ModelError::Transport(e.to_string()))?;

        let status = response.status();
        let body_text = response
            .text()
            .map_err(|e| ModelError::Transport(e.to_string()))?;
        match status.as_u16() {
            200..=299 => {}
            401 | 403 => return Err(ModelError::Auth(body_text)),
            429 => return Err(ModelError::RateLimited(body_text)),
            _ => {
                return Err(ModelError::Transport(format!(
                    "status {status}: {body_text}"
                )))
            }
        }

        let body: Value = serde_json::from_str(&body_text)
            .map_err(|e| ModelError::MalformedReply(e.to_string()))?;
        let text = parse_reply(&body)?;
        Ok(GenerationResponse {
            text: text.trim_end().to_string(),
            retrieval_score: None,
        })
    }
}
