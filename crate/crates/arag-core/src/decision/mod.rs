//! Retrieval-decision policies.
//!
//! Five policies answer "does this question need retrieval?": the constant
//! always/never baselines, calibration thresholding on a backend-reported
//! score, plain yes/no prompting, and the time-aware variant that injects
//! the current date and similarity-selected demonstrations.

mod embedding;

pub use embedding::{EmbeddingError, EmbeddingProvider, TfEmbedder};

use crate::corpus::{DemoExample, DemoLabel, DemoPool, QuestionRecord};
use crate::modelio::{
    self, GenerateError, GenerationParams, GenerationRequest, ModelClient, ResponseCache,
};
use crate::prompts;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DecisionError {
    #[error("reply carries neither a yes nor a no marker: {reply:?}")]
    UnparseableReply { reply: String },
    #[error("{0}")]
    Usage(String),
    #[error("demonstration pool has {available} {label:?} examples, policy needs {needed}")]
    InsufficientPool {
        label: DemoLabel,
        available: usize,
        needed: usize,
    },
    #[error("policy requires {0}")]
    MissingCapability(String),
    #[error("policy configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Generate(#[from] GenerateError),
}

/// Knobs of the time-aware policy. Defaults give 2 + 2 demonstrations and a
/// date sentence for the current day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaAreConfig {
    pub k_yes: usize,
    pub k_no: usize,
    pub include_date: bool,
    pub date: NaiveDate,
}

impl Default for TaAreConfig {
    fn default() -> Self {
        Self {
            k_yes: 2,
            k_no: 2,
            include_date: true,
            date: chrono::Local::now().date_naive(),
        }
    }
}

/// The x-axis of every experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum DecisionPolicy {
    /// Standard RAG: retrieve for every question.
    Always,
    /// Closed book: never retrieve.
    Never,
    /// Retrieve iff the backend's retrieval score is at least `t`; with
    /// `t = None` the backend's own reply decides (a retrieval token in the
    /// probe reply triggers retrieval).
    Threshold { t: Option<f64> },
    /// Ask the model a plain yes/no question.
    VanillaPrompt,
    /// Yes/no prompting with date injection and selected demonstrations.
    TaAre(TaAreConfig),
}

impl DecisionPolicy {
    /// Short human-readable label for tables and file names.
    pub fn label(&self) -> String {
        match self {
            DecisionPolicy::Always => "always".into(),
            DecisionPolicy::Never => "never".into(),
            DecisionPolicy::Threshold { t: Some(t) } => format!("threshold(t={t})"),
            DecisionPolicy::Threshold { t: None } => "threshold(t=none)".into(),
            DecisionPolicy::VanillaPrompt => "vanilla".into(),
            DecisionPolicy::TaAre(_) => "ta-are".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionRationale {
    PolicyConstant,
    ScoreVsThreshold,
    ModelYesNo,
}

/// A policy's verdict for one question, with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalDecision {
    pub retrieve: bool,
    pub rationale: DecisionRationale,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_reply: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl RetrievalDecision {
    fn constant(retrieve: bool) -> Self {
        Self {
            retrieve,
            rationale: DecisionRationale::PolicyConstant,
            raw_reply: None,
            score: None,
        }
    }
}

/// Everything a policy may need at decision time.
pub struct DecisionContext<'a> {
    pub client: &'a dyn ModelClient,
    pub cache: Option<&'a ResponseCache>,
    pub model_id: &'a str,
    pub params: GenerationParams,
    pub pool: Option<&'a DemoPool>,
    pub embedder: Option<&'a dyn EmbeddingProvider>,
}

/// Scan the reply case-insensitively: whichever marker ("[yes]"/"[no]" or
/// the standalone words) occurs first decides. No marker at all is an error
/// so the caller can choose a fallback.
pub fn parse_yes_no(reply: &str) -> Result<bool, DecisionError> {
    let lowered = reply.to_lowercase();
    let yes = marker_position(&lowered, "yes");
    let no = marker_position(&lowered, "no");
    match (yes, no) {
        (Some(y), Some(n)) => Ok(y < n),
        (Some(_), None) => Ok(true),
        (None, Some(_)) => Ok(false),
        (None, None) => Err(DecisionError::UnparseableReply {
            reply: reply.to_string(),
        }),
    }
}

fn marker_position(lowered: &str, word: &str) -> Option<usize> {
    let bracketed = lowered.find(&format!("[{word}]"));
    let standalone = lowered
        .match_indices(word)
        .find(|(pos, _)| {
            let before_ok = lowered[..*pos]
                .chars()
                .next_back()
                .map_or(true, |c| !c.is_alphanumeric());
            let after_ok = lowered[pos + word.len()..]
                .chars()
                .next()
                .map_or(true, |c| !c.is_alphanumeric());
            before_ok && after_ok
        })
        .map(|(pos, _)| pos);
    match (bracketed, standalone) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

/// dot(a,b) / (‖a‖·‖b‖). Zero vectors and dimension mismatches are usage
/// errors.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, DecisionError> {
    if a.len() != b.len() {
        return Err(DecisionError::Usage(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let norm_a = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let norm_b = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(DecisionError::Usage("zero vector".into()));
    }
    Ok(dot / (norm_a * norm_b))
}

// Selection ranks zero vectors at similarity 0 instead of erroring, so a
// query outside the embedder's vocabulary still yields a decision.
fn similarity_for_ranking(query: &[f64], candidate: &[f64]) -> Result<f64, DecisionError> {
    if query.len() != candidate.len() {
        return Err(DecisionError::Usage(format!(
            "dimension mismatch: query {} vs embedding {}",
            query.len(),
            candidate.len()
        )));
    }
    match cosine_similarity(query, candidate) {
        Ok(s) => Ok(s),
        Err(DecisionError::Usage(_)) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Pick the `k_yes` yes-examples most similar to the question (ties by
/// ascending pool index), ordered by descending similarity, followed by the
/// first `k_no` no-examples in pool order.
pub fn select_demonstrations(
    question: &str,
    pool: &DemoPool,
    config: &TaAreConfig,
    embedder: &dyn EmbeddingProvider,
) -> Result<Vec<(DemoExample, DemoLabel)>, DecisionError> {
    if pool.yes_examples.len() < config.k_yes {
        return Err(DecisionError::InsufficientPool {
            label: DemoLabel::Yes,
            available: pool.yes_examples.len(),
            needed: config.k_yes,
        });
    }
    if pool.no_examples.len() < config.k_no {
        return Err(DecisionError::InsufficientPool {
            label: DemoLabel::No,
            available: pool.no_examples.len(),
            needed: config.k_no,
        });
    }

    let mut selected = Vec::with_capacity(config.k_yes + config.k_no);
    if config.k_yes > 0 {
        let query = embedder.embed(question)?;
        let mut scored = Vec::with_capacity(pool.yes_examples.len());
        for (idx, example) in pool.yes_examples.iter().enumerate() {
            let embedding = example.embedding.as_deref().ok_or_else(|| {
                DecisionError::Config(format!("yes example {idx} lacks an embedding"))
            })?;
            scored.push((idx, similarity_for_ranking(&query, embedding)?));
        }
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
        });
        for (idx, _) in scored.into_iter().take(config.k_yes) {
            selected.push((pool.yes_examples[idx].clone(), DemoLabel::Yes));
        }
    }
    for example in pool.no_examples.iter().take(config.k_no) {
        selected.push((example.clone(), DemoLabel::No));
    }
    Ok(selected)
}

/// Apply a policy to one question.
pub fn decide(
    policy: &DecisionPolicy,
    record: &QuestionRecord,
    ctx: &DecisionContext,
) -> Result<RetrievalDecision, DecisionError> {
    match policy {
        DecisionPolicy::Always => Ok(RetrievalDecision::constant(true)),
        DecisionPolicy::Never => Ok(RetrievalDecision::constant(false)),
        DecisionPolicy::Threshold { t } => decide_threshold(*t, record, ctx),
        DecisionPolicy::VanillaPrompt => {
            decide_by_prompt(prompts::render_vanilla_prompt(&record.question), ctx)
        }
        DecisionPolicy::TaAre(config) => {
            let pool = ctx
                .pool
                .ok_or_else(|| DecisionError::Config("ta-are needs a demonstration pool".into()))?;
            let embedder = ctx.embedder.ok_or_else(|| {
                DecisionError::Config("ta-are needs an embedding provider".into())
            })?;
            let demos = select_demonstrations(&record.question, pool, config, embedder)?;
            decide_by_prompt(
                prompts::render_ta_are_prompt(&record.question, config, &demos),
                ctx,
            )
        }
    }
}

fn probe_request(ctx: &DecisionContext, prompt: String) -> GenerationRequest {
    GenerationRequest {
        model_id: ctx.model_id.to_string(),
        system_prompt: None,
        user_prompt: prompt,
        params: ctx.params,
    }
}

fn decide_threshold(
    t: Option<f64>,
    record: &QuestionRecord,
    ctx: &DecisionContext,
) -> Result<RetrievalDecision, DecisionError> {
    if t.is_some() && !ctx.client.supports_retrieval_score() {
        return Err(DecisionError::MissingCapability(
            "a retrieval-score-capable backend for the threshold policy".into(),
        ));
    }
    let request = probe_request(ctx, record.question.clone());
    let response = modelio::generate(ctx.client, ctx.cache, &request)?;
    match t {
        Some(t) => {
            let score = response.retrieval_score.ok_or_else(|| {
                DecisionError::MissingCapability(
                    "a retrieval score in the probe response".into(),
                )
            })?;
            Ok(RetrievalDecision {
                retrieve: score >= t,
                rationale: DecisionRationale::ScoreVsThreshold,
                raw_reply: Some(response.text),
                score: Some(score),
            })
        }
        None => {
            // Backend decides by emitting its own retrieval token.
            let retrieve = response.text.to_lowercase().contains("[retrieval]");
            Ok(RetrievalDecision {
                retrieve,
                rationale: DecisionRationale::ModelYesNo,
                raw_reply: Some(response.text),
                score: response.retrieval_score,
            })
        }
    }
}

fn decide_by_prompt(
    prompt: String,
    ctx: &DecisionContext,
) -> Result<RetrievalDecision, DecisionError> {
    let request = probe_request(ctx, prompt);
    let response = modelio::generate(ctx.client, ctx.cache, &request)?;
    let retrieve = parse_yes_no(&response.text)?;
    Ok(RetrievalDecision {
        retrieve,
        rationale: DecisionRationale::ModelYesNo,
        raw_reply: Some(response.text),
        score: None,
    })
}
