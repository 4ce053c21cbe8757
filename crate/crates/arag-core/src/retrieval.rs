//! Document retrieval behind one interface: the static per-question store
//! (replaying pre-retrieved documents) and a BM25 lexical index as the
//! offline fallback.

use crate::corpus::{Document, QuestionRecord};
use crate::metrics;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("corpus must be non-empty")]
    EmptyCorpus,
    #[error("duplicate document id {0:?}")]
    DuplicateDocId(String),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("index file {path} is corrupt: {message}")]
    Corrupt { path: String, message: String },
}

/// A ranked-document source. Results are ordered by descending relevance
/// score and are deterministic for a fixed index and query.
pub trait Retriever: Send + Sync {
    fn name(&self) -> &str;
    fn retrieve(&self, query: &str, k: usize) -> Vec<(Document, f64)>;
}

/// Inverted index scored with Okapi BM25.
///
/// Maps are ordered so that serialization (and thus `cmd index` output) is
/// byte-identical across rebuilds of the same corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexicalIndex {
    pub k1: f64,
    pub b: f64,
    documents: BTreeMap<String, Document>,
    /// term -> (doc id, term frequency), doc ids ascending
    postings: BTreeMap<String, Vec<(String, usize)>>,
    doc_lengths: BTreeMap<String, usize>,
    avg_doc_length: f64,
}

pub const DEFAULT_K1: f64 = 1.2;
pub const DEFAULT_B: f64 = 0.75;

/// Build a BM25 index over the corpus. Document text is tokenized with the
/// same normalization the metrics use.
pub fn build_index(corpus: &[Document]) -> Result<LexicalIndex, RetrievalError> {
    if corpus.is_empty() {
        return Err(RetrievalError::EmptyCorpus);
    }
    let mut documents = BTreeMap::new();
    let mut doc_lengths = BTreeMap::new();
    let mut term_to_docs: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();

    for doc in corpus {
        if documents.insert(doc.id.clone(), doc.clone()).is_some() {
            return Err(RetrievalError::DuplicateDocId(doc.id.clone()));
        }
        let tokens = metrics::tokenize(&doc.text);
        doc_lengths.insert(doc.id.clone(), tokens.len());
        for token in tokens {
            *term_to_docs
                .entry(token)
                .or_default()
                .entry(doc.id.clone())
                .or_insert(0) += 1;
        }
    }

    let postings = term_to_docs
        .into_iter()
        .map(|(term, docs)| (term, docs.into_iter().collect()))
        .collect();
    let total: usize = doc_lengths.values().sum();
    let avg_doc_length = total as f64 / doc_lengths.len() as f64;

    Ok(LexicalIndex {
        k1: DEFAULT_K1,
        b: DEFAULT_B,
        documents,
        postings,
        doc_lengths,
        avg_doc_length,
    })
}

impl LexicalIndex {
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_length(&self, doc_id: &str) -> Option<usize> {
        self.doc_lengths.get(doc_id).copied()
    }

    /// Terms with their document frequencies.
    pub fn vocabulary(&self) -> impl Iterator<Item = (&str, usize)> {
        self.postings
            .iter()
            .map(|(term, docs)| (term.as_str(), docs.len()))
    }

    pub fn vocabulary_size(&self) -> usize {
        self.postings.len()
    }

    /// BM25 scores for the query, best first; ties break by ascending doc id.
    /// Documents sharing no query term are never returned.
    pub fn search(&self, query: &str, k: usize) -> Vec<(Document, f64)> {
        if k == 0 {
            return Vec::new();
        }
        let n = self.documents.len() as f64;
        let mut scores: BTreeMap<&str, f64> = BTreeMap::new();
        for token in metrics::tokenize(query) {
            let Some(postings) = self.postings.get(&token) else {
                continue;
            };
            let df = postings.len() as f64;
            let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
            for (doc_id, tf) in postings {
                let dl = self.doc_lengths[doc_id] as f64;
                let tf = *tf as f64;
                let tf_norm = (tf * (self.k1 + 1.0))
                    / (tf + self.k1 * (1.0 - self.b + self.b * dl / self.avg_doc_length));
                *scores.entry(doc_id.as_str()).or_insert(0.0) += idf * tf_norm;
            }
        }
        let mut ranked: Vec<(&str, f64)> = scores
            .into_iter()
            .filter(|(_, score)| *score > 0.0)
            .collect();
        ranked.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.0.cmp(b.0))
        });
        ranked.truncate(k);
        ranked
            .into_iter()
            .map(|(doc_id, score)| (self.documents[doc_id].clone(), score))
            .collect()
    }

    /// Persist as canonical JSON; identical corpora yield identical bytes.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RetrievalError> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).expect("index serializes");
        fs::write(path, json + "\n").map_err(|source| RetrievalError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RetrievalError> {
        let path = path.as_ref();
        let content = fs::read_to_string(path).map_err(|source| RetrievalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&content).map_err(|e| RetrievalError::Corrupt {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

impl Retriever for LexicalIndex {
    fn name(&self) -> &str {
        "lexical"
    }

    fn retrieve(&self, query: &str, k: usize) -> Vec<(Document, f64)> {
        self.search(query, k)
    }
}

/// Replays each record's own pre-retrieved documents; the query is the
/// record id. Unknown ids and records without documents yield nothing.
pub struct StaticRetriever {
    docs_by_id: HashMap<String, Vec<Document>>,
}

pub fn static_retriever(dataset: &[QuestionRecord]) -> StaticRetriever {
    let docs_by_id = dataset
        .iter()
        .filter_map(|record| {
            record.documents.as_ref().map(|docs| {
                let mut docs = docs.clone();
                docs.sort_by_key(|d| d.rank);
                (record.id.clone(), docs)
            })
        })
        .collect();
    StaticRetriever { docs_by_id }
}

impl Retriever for StaticRetriever {
    fn name(&self) -> &str {
        "static"
    }

    fn retrieve(&self, query: &str, k: usize) -> Vec<(Document, f64)> {
        match self.docs_by_id.get(query) {
            Some(docs) => docs
                .iter()
                .take(k)
                .map(|d| (d.clone(), 1.0 / d.rank as f64))
                .collect(),
            None => Vec::new(),
        }
    }
}
