//! The conditional RAG loop: decide, retrieve, answer, classify; plus run
//! aggregation, error-flow decomposition, the dataset-construction filters,
//! and run artifacts.
//!
//! Records are processed independently across a bounded worker pool and
//! re-assembled in dataset order, so a run over a deterministic backend is
//! bit-reproducible regardless of worker count.

pub mod report;

use crate::corpus::{self, Document, QuestionRecord};
use crate::decision::{
    self, DecisionContext, DecisionError, DecisionPolicy, DecisionRationale, EmbeddingProvider,
    RetrievalDecision,
};
use crate::metrics::{self, DecisionOutcomeCounts, MetricReport, MetricsError};
use crate::modelio::{
    self, GenerateError, GenerationParams, GenerationRequest, ModelClient, ResponseCache,
};
use crate::prompts;
use crate::retrieval::Retriever;
use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("run aborted at record {question_id:?} ({completed} records completed): {cause}")]
    Aborted {
        question_id: String,
        cause: String,
        completed: usize,
        partial: Vec<RunRecord>,
    },
    #[error(transparent)]
    Decision(#[from] DecisionError),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("artifact I/O at {path}: {source}")]
    Artifact {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("artifact {path} is corrupt: {message}")]
    CorruptArtifact { path: String, message: String },
}

/// How one prediction scored against the gold answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Correct,
    Incorrect,
    Idk,
}

/// Per-question result of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub question_id: String,
    pub decision: RetrievalDecision,
    pub prediction: String,
    pub outcome: Outcome,
    pub docs_used: usize,
}

/// (decision yes/no) x (correct/incorrect/idk) counts; the data behind the
/// error-flow plots.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowCounts {
    pub yes_correct: usize,
    pub yes_incorrect: usize,
    pub yes_idk: usize,
    pub no_correct: usize,
    pub no_incorrect: usize,
    pub no_idk: usize,
}

impl FlowCounts {
    pub fn total(&self) -> usize {
        self.yes_correct
            + self.yes_incorrect
            + self.yes_idk
            + self.no_correct
            + self.no_incorrect
            + self.no_idk
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Decision replies with neither marker; these fell back to no-retrieval.
    pub unparseable_decisions: usize,
    /// Records where retrieval was decided but no documents were obtainable.
    pub retrieval_misses: usize,
}

/// A finished run: per-record outcomes plus aggregates recomputable from
/// them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub policy: DecisionPolicy,
    pub model_id: String,
    pub timestamp: String,
    pub report: MetricReport,
    pub decision_counts: DecisionOutcomeCounts,
    pub flow: FlowCounts,
    pub diagnostics: Diagnostics,
    pub records: Vec<RunRecord>,
}

/// The summary document written alongside the per-record artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub policy: DecisionPolicy,
    pub model_id: String,
    pub timestamp: String,
    pub n: usize,
    pub report: MetricReport,
    pub decision_counts: DecisionOutcomeCounts,
    pub flow: FlowCounts,
    pub diagnostics: Diagnostics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

impl RunResult {
    pub fn summary(&self, config: Option<serde_json::Value>) -> RunSummary {
        RunSummary {
            policy: self.policy.clone(),
            model_id: self.model_id.clone(),
            timestamp: self.timestamp.clone(),
            n: self.records.len(),
            report: self.report,
            decision_counts: self.decision_counts,
            flow: self.flow,
            diagnostics: self.diagnostics,
            config,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Documents fetched per retrieval.
    pub k_docs: usize,
    /// Bounded worker count; 1 runs sequentially.
    pub workers: usize,
    /// Optional cap on total paragraph characters in the answer prompt.
    pub max_doc_chars: Option<usize>,
    /// Override the artifact timestamp for reproducible outputs.
    pub timestamp: Option<String>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            k_docs: 5,
            workers: 1,
            max_doc_chars: None,
            timestamp: None,
        }
    }
}

/// Everything a run needs besides the dataset and policy.
pub struct RunContext<'a> {
    pub client: &'a dyn ModelClient,
    pub cache: Option<&'a ResponseCache>,
    pub model_id: String,
    pub params: GenerationParams,
    pub pool: Option<&'a crate::corpus::DemoPool>,
    pub embedder: Option<&'a dyn EmbeddingProvider>,
    /// Consulted when a record carries no pre-retrieved documents.
    pub fallback_retriever: Option<&'a dyn Retriever>,
    pub options: RunOptions,
}

impl<'a> RunContext<'a> {
    pub fn new(client: &'a dyn ModelClient, model_id: impl Into<String>) -> Self {
        Self {
            client,
            cache: None,
            model_id: model_id.into(),
            params: GenerationParams::default(),
            pool: None,
            embedder: None,
            fallback_retriever: None,
            options: RunOptions::default(),
        }
    }

    fn decision_ctx(&self) -> DecisionContext<'_> {
        DecisionContext {
            client: self.client,
            cache: self.cache,
            model_id: &self.model_id,
            params: self.params,
            pool: self.pool,
            embedder: self.embedder,
        }
    }
}

/// An answered question: the prediction plus how many documents backed it.
#[derive(Debug, Clone, PartialEq)]
pub struct Answer {
    pub prediction: String,
    pub docs_used: usize,
}

fn fetch_documents(record: &QuestionRecord, ctx: &RunContext) -> Vec<Document> {
    match corpus::get_documents(record, ctx.options.k_docs) {
        Ok(docs) => docs,
        Err(_) => ctx
            .fallback_retriever
            .map(|retriever| {
                retriever
                    .retrieve(&record.question, ctx.options.k_docs)
                    .into_iter()
                    .map(|(doc, _)| doc)
                    .collect()
            })
            .unwrap_or_default(),
    }
}

/// Answer one question under a decision. Retrieval tries the record's own
/// documents first, then the fallback retriever; when nothing is obtainable
/// the closed-book prompt is used and `docs_used` stays 0.
pub fn answer_question(
    record: &QuestionRecord,
    decision: &RetrievalDecision,
    ctx: &RunContext,
) -> Result<Answer, PipelineError> {
    let docs = if decision.retrieve {
        fetch_documents(record, ctx)
    } else {
        Vec::new()
    };
    let prompt = if decision.retrieve && !docs.is_empty() {
        prompts::render_context_prompt(&record.question, &docs, ctx.options.max_doc_chars)
    } else {
        prompts::render_closed_book_prompt(&record.question)
    };
    let request = GenerationRequest {
        model_id: ctx.model_id.clone(),
        system_prompt: None,
        user_prompt: prompt,
        params: ctx.params,
    };
    let response = modelio::generate(ctx.client, ctx.cache, &request)?;
    Ok(Answer {
        prediction: response.text,
        docs_used: docs.len(),
    })
}

/// IDK takes precedence over loose match, so hedged replies never count as
/// correct.
pub fn classify_outcome(
    prediction: &str,
    gold_answers: &[String],
) -> Result<Outcome, MetricsError> {
    if metrics::is_idk(prediction) {
        return Ok(Outcome::Idk);
    }
    if metrics::loose_match(prediction, gold_answers)? {
        Ok(Outcome::Correct)
    } else {
        Ok(Outcome::Incorrect)
    }
}

struct EvaluatedRecord {
    record: RunRecord,
    unparseable: bool,
}

fn evaluate_record(
    record: &QuestionRecord,
    policy: &DecisionPolicy,
    ctx: &RunContext,
) -> Result<EvaluatedRecord, PipelineError> {
    let (decision, unparseable) = match decision::decide(policy, record, &ctx.decision_ctx()) {
        Ok(decision) => (decision, false),
        // Non-conforming yes/no replies fall back to no-retrieval and are
        // tallied rather than failing the run.
        Err(DecisionError::UnparseableReply { reply }) => (
            RetrievalDecision {
                retrieve: false,
                rationale: DecisionRationale::ModelYesNo,
                raw_reply: Some(reply),
                score: None,
            },
            true,
        ),
        Err(e) => return Err(e.into()),
    };
    let answer = answer_question(record, &decision, ctx)?;
    let outcome = classify_outcome(&answer.prediction, &record.gold_answers)?;
    Ok(EvaluatedRecord {
        record: RunRecord {
            question_id: record.id.clone(),
            decision,
            prediction: answer.prediction,
            outcome,
            docs_used: answer.docs_used,
        },
        unparseable,
    })
}

/// Run `f` over `0..n` with at most `workers` threads, collecting results in
/// index order.
fn run_indexed<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    if workers <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers.min(n) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let value = f(i);
                *slots[i].lock().unwrap() = Some(value);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("worker filled slot"))
        .collect()
}

/// Evaluate a whole dataset under one policy.
///
/// Records are emitted in dataset order regardless of execution order. Any
/// record-level hard error aborts with the completed prefix attached;
/// unparseable decision replies are soft (see [`Diagnostics`]).
pub fn run_evaluation(
    dataset: &[QuestionRecord],
    policy: &DecisionPolicy,
    ctx: &RunContext,
) -> Result<RunResult, PipelineError> {
    if dataset.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    let evaluated = run_indexed(dataset.len(), ctx.options.workers, |i| {
        evaluate_record(&dataset[i], policy, ctx)
    });

    let mut records = Vec::with_capacity(dataset.len());
    let mut diagnostics = Diagnostics::default();
    for (i, outcome) in evaluated.into_iter().enumerate() {
        match outcome {
            Ok(EvaluatedRecord {
                record,
                unparseable,
            }) => {
                if unparseable {
                    diagnostics.unparseable_decisions += 1;
                }
                if record.decision.retrieve && record.docs_used == 0 {
                    diagnostics.retrieval_misses += 1;
                }
                records.push(record);
            }
            Err(e) => {
                let completed = records.len();
                return Err(PipelineError::Aborted {
                    question_id: dataset[i].id.clone(),
                    cause: e.to_string(),
                    completed,
                    partial: records,
                });
            }
        }
    }

    let decisions: Vec<bool> = records.iter().map(|r| r.decision.retrieve).collect();
    let labels: Vec<bool> = dataset.iter().map(|r| r.needs_retrieval).collect();
    let decision_stats = metrics::decision_metrics(&decisions, &labels)?;

    let needs_total = labels.iter().filter(|l| **l).count();
    let needs_retrieved = labels
        .iter()
        .zip(&decisions)
        .filter(|(label, decision)| **label && **decision)
        .count();
    // No needs-retrieval records means the needs-only view is vacuous; 0.0
    // keeps the report total.
    let retrieval_accuracy = if needs_total == 0 {
        0.0
    } else {
        needs_retrieved as f64 / needs_total as f64
    };
    let correct = records
        .iter()
        .filter(|r| r.outcome == Outcome::Correct)
        .count();
    let flow = flow_decomposition(&records);

    let report = MetricReport {
        retrieval_accuracy,
        match_accuracy: correct as f64 / records.len() as f64,
        macro_precision: decision_stats.macro_precision,
        macro_recall: decision_stats.macro_recall,
        macro_f1: decision_stats.macro_f1,
        n: records.len(),
    };
    let timestamp = ctx
        .options
        .timestamp
        .clone()
        .unwrap_or_else(|| Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true));

    Ok(RunResult {
        policy: policy.clone(),
        model_id: ctx.model_id.clone(),
        timestamp,
        report,
        decision_counts: decision_stats.counts,
        flow,
        diagnostics,
        records,
    })
}

/// Count each record into its (decision x outcome) cell.
pub fn flow_decomposition(records: &[RunRecord]) -> FlowCounts {
    let mut flow = FlowCounts::default();
    for record in records {
        let cell = match (record.decision.retrieve, record.outcome) {
            (true, Outcome::Correct) => &mut flow.yes_correct,
            (true, Outcome::Incorrect) => &mut flow.yes_incorrect,
            (true, Outcome::Idk) => &mut flow.yes_idk,
            (false, Outcome::Correct) => &mut flow.no_correct,
            (false, Outcome::Incorrect) => &mut flow.no_incorrect,
            (false, Outcome::Idk) => &mut flow.no_idk,
        };
        *cell += 1;
    }
    flow
}

/// A discarded candidate with the judge evidence that discarded it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscardedRecord {
    pub record: QuestionRecord,
    pub judge_prediction: String,
    pub f1: f64,
}

/// A candidate the judge could not be run on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnjudgedRecord {
    pub record: QuestionRecord,
    pub error: String,
}

/// Partition produced by [`filter_needs_retrieval`]: kept, discarded, and
/// unjudged are pairwise disjoint and cover the input.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub kept: Vec<QuestionRecord>,
    pub discarded: Vec<DiscardedRecord>,
    pub unjudged: Vec<UnjudgedRecord>,
}

/// A judging backend with its request plumbing.
pub struct JudgeContext<'a> {
    pub client: &'a dyn ModelClient,
    pub cache: Option<&'a ResponseCache>,
    pub model_id: String,
    pub params: GenerationParams,
}

fn judge_closed_book(
    judge: &JudgeContext,
    question: &str,
) -> Result<String, GenerateError> {
    let request = GenerationRequest {
        model_id: judge.model_id.clone(),
        system_prompt: None,
        user_prompt: prompts::render_closed_book_prompt(question),
        params: judge.params,
    };
    Ok(modelio::generate(judge.client, judge.cache, &request)?.text)
}

/// Closed-book judge each candidate and keep exactly those whose judged
/// prediction has token F1 = 0 against the gold answers. Judge failures go
/// to the unjudged bucket, never silently into kept.
pub fn filter_needs_retrieval(
    candidates: &[QuestionRecord],
    judge: &JudgeContext,
) -> FilterOutcome {
    let mut outcome = FilterOutcome::default();
    for candidate in candidates {
        let prediction = match judge_closed_book(judge, &candidate.question) {
            Ok(text) => text,
            Err(e) => {
                outcome.unjudged.push(UnjudgedRecord {
                    record: candidate.clone(),
                    error: e.to_string(),
                });
                continue;
            }
        };
        match metrics::token_f1(&prediction, &candidate.gold_answers) {
            Ok(f1) if f1 == 0.0 => outcome.kept.push(candidate.clone()),
            Ok(f1) => outcome.discarded.push(DiscardedRecord {
                record: candidate.clone(),
                judge_prediction: prediction,
                f1,
            }),
            Err(e) => outcome.unjudged.push(UnjudgedRecord {
                record: candidate.clone(),
                error: e.to_string(),
            }),
        }
    }
    outcome
}

/// The answerable slice of a discarded set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnswerablePartition {
    /// Records a weak judge answered correctly (loose match), relabeled
    /// `needs_retrieval = false`.
    pub answerable: Vec<QuestionRecord>,
    pub unjudged: Vec<UnjudgedRecord>,
}

/// Closed-book judge each discarded record with a weak model and keep those
/// it answers correctly under loose match.
pub fn partition_answerable(
    discarded: &[QuestionRecord],
    weak_judge: &JudgeContext,
) -> AnswerablePartition {
    let mut partition = AnswerablePartition::default();
    for record in discarded {
        let prediction = match judge_closed_book(weak_judge, &record.question) {
            Ok(text) => text,
            Err(e) => {
                partition.unjudged.push(UnjudgedRecord {
                    record: record.clone(),
                    error: e.to_string(),
                });
                continue;
            }
        };
        match metrics::loose_match(&prediction, &record.gold_answers) {
            Ok(true) => {
                let mut kept = record.clone();
                kept.needs_retrieval = false;
                partition.answerable.push(kept);
            }
            Ok(false) => {}
            Err(e) => partition.unjudged.push(UnjudgedRecord {
                record: record.clone(),
                error: e.to_string(),
            }),
        }
    }
    partition
}

fn artifact_io(path: &Path) -> impl Fn(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Artifact {
        path: path.display().to_string(),
        source,
    }
}

/// Write the run artifact: `records.jsonl`, `summary.json`, and `flow.csv`.
/// Output bytes are a pure function of the result and config echo.
pub fn write_run_artifact(
    result: &RunResult,
    dir: impl AsRef<Path>,
    config_echo: Option<serde_json::Value>,
) -> Result<(), PipelineError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(artifact_io(dir))?;

    let records_path = dir.join("records.jsonl");
    let mut lines = String::new();
    for record in &result.records {
        lines.push_str(&serde_json::to_string(record).expect("record serializes"));
        lines.push('\n');
    }
    fs::write(&records_path, lines).map_err(artifact_io(&records_path))?;

    let summary_path = dir.join("summary.json");
    let summary = result.summary(config_echo);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&summary_path, json + "\n").map_err(artifact_io(&summary_path))?;

    let flow_path = dir.join("flow.csv");
    fs::write(&flow_path, report::render_flow_csv(&result.flow))
        .map_err(artifact_io(&flow_path))?;
    Ok(())
}

/// Write what completed before an aborted run, plus the failure context.
pub fn write_partial_artifact(
    partial: &[RunRecord],
    failed_id: &str,
    cause: &str,
    dir: impl AsRef<Path>,
) -> Result<(), PipelineError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(artifact_io(dir))?;
    let records_path = dir.join("records.jsonl");
    let mut lines = String::new();
    for record in partial {
        lines.push_str(&serde_json::to_string(record).expect("record serializes"));
        lines.push('\n');
    }
    fs::write(&records_path, lines).map_err(artifact_io(&records_path))?;
    let partial_path = dir.join("partial.json");
    let doc = serde_json::json!({
        "failed_id": failed_id,
        "cause": cause,
        "completed": partial.len(),
    });
    fs::write(
        &partial_path,
        serde_json::to_string_pretty(&doc).expect("doc serializes") + "\n",
    )
    .map_err(artifact_io(&partial_path))
}

/// Read a run summary back from an artifact directory (or a direct path to
/// a summary file).
pub fn read_run_summary(path: impl AsRef<Path>) -> Result<RunSummary, PipelineError> {
    let path = path.as_ref();
    let file = if path.is_dir() {
        path.join("summary.json")
    } else {
        path.to_path_buf()
    };
    let content = fs::read_to_string(&file).map_err(artifact_io(&file))?;
    serde_json::from_str(&content).map_err(|e| PipelineError::CorruptArtifact {
        path: file.display().to_string(),
        message: e.to_string(),
    })
}
