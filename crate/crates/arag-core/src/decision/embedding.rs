//! Question embedding behind a trait.
//!
//! Production deployments plug in a sentence-embedding service; the built-in
//! [`TfEmbedder`] embeds by L2-normalized term frequencies over a fixed
//! vocabulary so demonstration selection runs fully offline.

use crate::metrics;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("embedding provider {provider}: {message}")]
pub struct EmbeddingError {
    pub provider: String,
    pub message: String,
}

/// Maps text to a fixed-dimension vector, deterministically.
pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbeddingError>;
}

/// Term-frequency embedder over a fixed vocabulary (typically the tokens of
/// a demonstration pool's questions). Texts sharing no vocabulary term embed
/// to the zero vector.
#[derive(Debug, Clone)]
pub struct TfEmbedder {
    vocabulary: BTreeMap<String, usize>,
}

impl TfEmbedder {
    pub fn from_texts<I, S>(texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut terms: Vec<String> = texts
            .into_iter()
            .flat_map(|t| metrics::tokenize(t.as_ref()))
            .collect();
        terms.sort();
        terms.dedup();
        let vocabulary = terms
            .into_iter()
            .enumerate()
            .map(|(i, term)| (term, i))
            .collect();
        Self { vocabulary }
    }
}

impl EmbeddingProvider for TfEmbedder {
    fn dimension(&self) -> usize {
        self.vocabulary.len()
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbeddingError> {
        let mut vector = vec![0.0; self.vocabulary.len()];
        for token in metrics::tokenize(text) {
            if let Some(&idx) = self.vocabulary.get(&token) {
                vector[idx] += 1.0;
            }
        }
        let norm = vector.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut vector {
                *v /= norm;
            }
        }
        Ok(vector)
    }
}
