//! Deterministic scripted clients. First matching entry wins; an optional
//! default catches everything else. No I/O is ever performed.

use super::{GenerationRequest, GenerationResponse, ModelClient, ModelError};
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};

/// How a script entry matches the user prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    /// The prompt equals this string exactly.
    Exact(String),
    /// Every listed substring occurs in the prompt.
    Contains(Vec<String>),
}

impl Matcher {
    /// Convenience for the common single-substring rule.
    pub fn contains(pattern: impl Into<String>) -> Self {
        Matcher::Contains(vec![pattern.into()])
    }

    fn matches(&self, prompt: &str) -> bool {
        match self {
            Matcher::Exact(expected) => prompt == expected,
            Matcher::Contains(patterns) => patterns.iter().all(|p| prompt.contains(p.as_str())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub matcher: Matcher,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl ScriptEntry {
    pub fn new(matcher: Matcher, text: impl Into<String>) -> Self {
        Self {
            matcher,
            text: text.into(),
            score: None,
        }
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = Some(score);
        self
    }
}

pub struct ScriptedClient {
    entries: Vec<ScriptEntry>,
    default: Option<(String, Option<f64>)>,
    supports_score: bool,
    calls: AtomicUsize,
}

impl ScriptedClient {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        let supports_score = entries.iter().any(|e| e.score.is_some());
        Self {
            entries,
            default: None,
            supports_score,
            calls: AtomicUsize::new(0),
        }
    }

    /// Reply for any prompt no entry matches.
    pub fn with_default(mut self, text: impl Into<String>, score: Option<f64>) -> Self {
        self.supports_score = self.supports_score || score.is_some();
        self.default = Some((text.into(), score));
        self
    }

    /// Number of generate calls served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

fn prompt_prefix(prompt: &str) -> String {
    prompt.chars().take(80).collect()
}

impl ModelClient for ScriptedClient {
    fn supports_retrieval_score(&self) -> bool {
        self.supports_score
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, ModelError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let prompt = request.user_prompt.as_str();
        for entry in &self.entries {
            if entry.matcher.matches(prompt) {
                return Ok(GenerationResponse {
                    text: entry.text.trim_end().to_string(),
                    retrieval_score: entry.score,
                });
            }
        }
        if let Some((text, score)) = &self.default {
            return Ok(GenerationResponse {
                text: text.trim_end().to_string(),
                retrieval_score: *score,
            });
        }
        Err(ModelError::ScriptMiss {
            prompt_prefix: prompt_prefix(prompt),
        })
    }
}
