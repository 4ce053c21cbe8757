//! Benchmark data model: question records, pre-retrieved documents, and
//! demonstration pools, loaded from line-delimited JSON files.
//!
//! Records are validated on load and immutable afterwards, so they can be
//! shared freely across worker threads.

use crate::decision::{EmbeddingError, EmbeddingProvider};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: parse error: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { id: String, line: usize },
    #[error("record {id:?} carries no pre-retrieved documents")]
    DocumentsUnavailable { id: String },
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// Where a benchmark question came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Realtimeqa,
    Freshqa,
    Toolqa,
    Popqa,
    Triviaqa,
    Custom,
}

/// Knowledge category: answers that postdate model training vs. answers too
/// rare to be memorized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    NewWorld,
    LongTail,
}

impl Source {
    /// The category this source implies, if any. `Custom` may carry either.
    pub fn implied_category(&self) -> Option<Category> {
        match self {
            Source::Realtimeqa | Source::Freshqa => Some(Category::NewWorld),
            Source::Toolqa | Source::Popqa | Source::Triviaqa => Some(Category::LongTail),
            Source::Custom => None,
        }
    }
}

/// One pre-retrieved document, ranked from 1 (most relevant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub text: String,
    pub rank: u32,
}

/// One benchmark item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub id: String,
    pub source: Source,
    pub category: Category,
    pub question: String,
    pub gold_answers: Vec<String>,
    pub needs_retrieval: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub documents: Option<Vec<Document>>,
}

impl QuestionRecord {
    /// Check every record-level invariant; the message names the violation.
    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("id must be non-empty".into());
        }
        if self.question.trim().is_empty() {
            return Err("question must be non-empty".into());
        }
        if self.gold_answers.is_empty() {
            return Err("gold_answers must have at least one entry".into());
        }
        if let Some(bad) = self.gold_answers.iter().find(|a| a.trim().is_empty()) {
            return Err(format!("gold answer {bad:?} is empty after trimming"));
        }
        if let Some(expected) = self.source.implied_category() {
            if self.category != expected {
                return Err(format!(
                    "source {:?} requires category {:?}, got {:?}",
                    self.source, expected, self.category
                ));
            }
        }
        if let Some(docs) = &self.documents {
            for (i, doc) in docs.iter().enumerate() {
                if doc.text.trim().is_empty() {
                    return Err(format!("document {} has empty text", doc.id));
                }
                let expected_rank = (i + 1) as u32;
                if doc.rank != expected_rank {
                    return Err(format!(
                        "documents must carry ranks 1..{} in order; position {} has rank {}",
                        docs.len(),
                        i + 1,
                        doc.rank
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Load a line-delimited dataset, validating every record and id uniqueness.
/// Records come back in file order; blank lines are skipped.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<QuestionRecord>, CorpusError> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut records = Vec::new();
    let mut seen_ids = HashSet::new();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: QuestionRecord =
            serde_json::from_str(line).map_err(|e| CorpusError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        record.validate().map_err(|message| CorpusError::Invalid {
            line: line_no,
            message,
        })?;
        if !seen_ids.insert(record.id.clone()) {
            return Err(CorpusError::DuplicateId {
                id: record.id,
                line: line_no,
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// Write records back out as one JSON object per line.
pub fn write_dataset(
    path: impl AsRef<Path>,
    records: &[QuestionRecord],
) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("record serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// The first `min(k, |documents|)` documents of a record, by ascending rank.
pub fn get_documents(record: &QuestionRecord, k: usize) -> Result<Vec<Document>, CorpusError> {
    if k == 0 {
        return Err(CorpusError::Validation("k must be positive".into()));
    }
    let docs = record
        .documents
        .as_ref()
        .ok_or_else(|| CorpusError::DocumentsUnavailable {
            id: record.id.clone(),
        })?;
    let mut sorted: Vec<Document> = docs.clone();
    sorted.sort_by_key(|d| d.rank);
    sorted.truncate(k);
    Ok(sorted)
}

/// Label of an in-context demonstration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemoLabel {
    Yes,
    No,
}

/// A labeled demonstration question, optionally with a precomputed embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoExample {
    pub question: String,
    pub label: DemoLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

/// The demonstration pool a policy draws its in-context examples from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoPool {
    pub dimension: usize,
    pub yes_examples: Vec<DemoExample>,
    pub no_examples: Vec<DemoExample>,
}

/// Load a demonstration pool, embedding any yes-example that does not already
/// carry a vector. No-examples are preserved verbatim in file order.
pub fn load_demo_pool(
    path: impl AsRef<Path>,
    embedder: &dyn EmbeddingProvider,
) -> Result<DemoPool, CorpusError> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut yes_examples = Vec::new();
    let mut no_examples = Vec::new();
    let mut dimension: Option<usize> = None;
    let mut check_dim = |dim: usize, line: usize| -> Result<(), CorpusError> {
        match dimension {
            None => {
                dimension = Some(dim);
                Ok(())
            }
            Some(expected) if expected == dim => Ok(()),
            Some(expected) => Err(CorpusError::Invalid {
                line,
                message: format!("embedding dimension {dim} does not match pool dimension {expected}"),
            }),
        }
    };

    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let example: DemoExample = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if example.question.trim().is_empty() {
            return Err(CorpusError::Invalid {
                line: line_no,
                message: "question must be non-empty".into(),
            });
        }
        if let Some(embedding) = &example.embedding {
            check_dim(embedding.len(), line_no)?;
        }
        match example.label {
            DemoLabel::Yes => yes_examples.push(example),
            DemoLabel::No => no_examples.push(example),
        }
    }

    // Fill in missing yes-example embeddings from the provider.
    for example in &mut yes_examples {
        if example.embedding.is_none() {
            let vector = embedder.embed(&example.question)?;
            if let Some(expected) = dimension {
                if vector.len() != expected {
                    return Err(CorpusError::Validation(format!(
                        "provider embeds at dimension {}, pool carries dimension {}",
                        vector.len(),
                        expected
                    )));
                }
            } else {
                dimension = Some(vector.len());
            }
            example.embedding = Some(vector);
        }
    }

    Ok(DemoPool {
        dimension: dimension.unwrap_or_else(|| embedder.dimension()),
        yes_examples,
        no_examples,
    })
}
