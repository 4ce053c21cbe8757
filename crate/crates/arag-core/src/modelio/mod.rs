//! Text-generation backends behind one interface.
//!
//! A [`ModelClient`] turns a [`GenerationRequest`] into a
//! [`GenerationResponse`]. The [`ScriptedClient`] makes whole runs
//! reproducible offline; the [`RemoteClient`] talks to a chat-completion
//! HTTP endpoint; the [`ResponseCache`] sits in front of either so that
//! byte-identical requests never hit a backend twice.

mod cache;
mod remote;
mod scripted;

pub use cache::{CacheError, ResponseCache};
pub use remote::{RemoteClient, API_KEY_ENV};
pub use scripted::{Matcher, ScriptEntry, ScriptedClient};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Sampling parameters sent with every request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            top_p: 1.0,
            max_tokens: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_prompt: Option<String>,
    pub user_prompt: String,
    pub params: GenerationParams,
}

impl GenerationRequest {
    pub fn new(model_id: impl Into<String>, user_prompt: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            system_prompt: None,
            user_prompt: user_prompt.into(),
            params: GenerationParams::default(),
        }
    }

    pub fn with_params(mut self, params: GenerationParams) -> Self {
        self.params = params;
        self
    }

    /// Stable cache key over all request fields.
    pub fn cache_key(&self) -> String {
        let canonical = serde_json::to_string(self).expect("request serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub text: String,
    /// Backend-reported need-to-retrieve score in [0,1]; higher means the
    /// backend believes retrieval is more necessary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieval_score: Option<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("authentication failure: {0}")]
    Auth(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("malformed backend reply: {0}")]
    MalformedReply(String),
    #[error("no script entry matches prompt starting {prompt_prefix:?}")]
    ScriptMiss { prompt_prefix: String },
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cache(#[from] CacheError),
}

/// A text-generation backend. Implementations must be safe to call from
/// multiple worker threads at once.
pub trait ModelClient: Send + Sync {
    /// Whether responses may carry a retrieval score.
    fn supports_retrieval_score(&self) -> bool {
        false
    }

    /// Return the backend's text verbatim apart from a trailing-whitespace
    /// strip, or a typed error; never both.
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, ModelError>;
}

/// Generate through the cache: on a hit the client is never contacted, on a
/// miss the response is stored before being returned. Client errors are not
/// cached.
pub fn cached_generate(
    cache: &ResponseCache,
    client: &dyn ModelClient,
    request: &GenerationRequest,
) -> Result<GenerationResponse, GenerateError> {
    let key = request.cache_key();
    if let Some(hit) = cache.get(&key) {
        return Ok(hit);
    }
    let response = client.generate(request)?;
    cache.put(&key, &request.model_id, &response)?;
    Ok(response)
}

/// Generate through the cache when one is configured, directly otherwise.
pub fn generate(
    client: &dyn ModelClient,
    cache: Option<&ResponseCache>,
    request: &GenerationRequest,
) -> Result<GenerationResponse, GenerateError> {
    match cache {
        Some(cache) => cached_generate(cache, client, request),
        None => Ok(client.generate(request)?),
    }
}
