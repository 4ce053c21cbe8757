//! Answer normalization, token-level F1, loose match, IDK detection, and
//! two-class retrieval-decision metrics.
//!
//! Normalization follows the SQuAD convention: lowercase, strip punctuation,
//! drop the articles "a"/"an"/"the", collapse whitespace. Token F1 uses bag
//! (multiset) overlap and takes the maximum over the gold answers; loose
//! match checks substring containment of any normalized gold answer in the
//! normalized prediction. All functions here are pure.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("gold_answers must be non-empty")]
    EmptyGoldAnswers,
    #[error("decisions and labels must have equal non-zero length (got {decisions} vs {labels})")]
    LengthMismatch { decisions: usize, labels: usize },
}

/// Lowercase, strip punctuation, drop standalone articles, collapse whitespace.
///
/// "Punctuation" here is any character that is neither alphanumeric nor
/// whitespace, which subsumes the ASCII set and also handles curly quotes
/// in model output.
pub fn normalize_text(s: &str) -> String {
    let lowered = s.to_lowercase();
    let stripped: String = lowered
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    stripped
        .split_whitespace()
        .filter(|tok| !matches!(*tok, "a" | "an" | "the"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Normalized whitespace tokens of `s`.
pub fn tokenize(s: &str) -> Vec<String> {
    normalize_text(s)
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

fn token_bag(tokens: &[String]) -> HashMap<&str, usize> {
    let mut bag = HashMap::new();
    for tok in tokens {
        *bag.entry(tok.as_str()).or_insert(0) += 1;
    }
    bag
}

fn f1_single(prediction_tokens: &[String], gold: &str) -> f64 {
    let gold_tokens = tokenize(gold);
    if prediction_tokens.is_empty() || gold_tokens.is_empty() {
        return 0.0;
    }
    let pred_bag = token_bag(prediction_tokens);
    let gold_bag = token_bag(&gold_tokens);
    let common: usize = pred_bag
        .iter()
        .map(|(tok, &count)| count.min(gold_bag.get(tok).copied().unwrap_or(0)))
        .sum();
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / prediction_tokens.len() as f64;
    let recall = common as f64 / gold_tokens.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Bag-of-tokens F1 between the prediction and each gold answer, maximized
/// over the gold answers. Zero when either side has no tokens or no overlap.
pub fn token_f1(prediction: &str, gold_answers: &[String]) -> Result<f64, MetricsError> {
    if gold_answers.is_empty() {
        return Err(MetricsError::EmptyGoldAnswers);
    }
    let pred_tokens = tokenize(prediction);
    Ok(gold_answers
        .iter()
        .map(|gold| f1_single(&pred_tokens, gold))
        .fold(0.0, f64::max))
}

/// True iff any normalized gold answer is a contiguous substring of the
/// normalized prediction.
pub fn loose_match(prediction: &str, gold_answers: &[String]) -> Result<bool, MetricsError> {
    if gold_answers.is_empty() {
        return Err(MetricsError::EmptyGoldAnswers);
    }
    let pred = normalize_text(prediction);
    Ok(gold_answers
        .iter()
        .any(|gold| pred.contains(&normalize_text(gold))))
}

/// True iff the normalized prediction contains "i dont know" or
/// "i do not know" (normalization strips the apostrophe).
pub fn is_idk(prediction: &str) -> bool {
    let norm = normalize_text(prediction);
    norm.contains("i dont know") || norm.contains("i do not know")
}

/// Confusion counts of retrieval decisions against needs-retrieval labels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionOutcomeCounts {
    /// decision = retrieve, label = needs retrieval
    pub true_yes: usize,
    /// decision = retrieve, label = no retrieval needed
    pub false_yes: usize,
    /// decision = no retrieve, label = no retrieval needed
    pub true_no: usize,
    /// decision = no retrieve, label = needs retrieval
    pub false_no: usize,
}

impl DecisionOutcomeCounts {
    pub fn total(&self) -> usize {
        self.true_yes + self.false_yes + self.true_no + self.false_no
    }
}

/// Two-class decision metrics: accuracy plus macro-averaged precision,
/// recall, and F1 over the retrieve / no-retrieve classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionMetrics {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub counts: DecisionOutcomeCounts,
}

/// Aggregated per-run metrics, the row shape of every results table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Fraction of needs-retrieval records for which retrieval was decided.
    pub retrieval_accuracy: f64,
    /// Fraction of records answered correctly (loose match, not IDK).
    pub match_accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Number of evaluated records.
    pub n: usize,
}

fn ratio_or_zero(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn class_f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Score retrieval decisions against needs-retrieval labels.
///
/// Per-class precision and recall are computed for the "retrieve" and
/// "no-retrieve" classes; a class with zero predicted (or zero actual)
/// instances contributes 0 to the macro mean rather than being dropped.
pub fn decision_metrics(
    decisions: &[bool],
    labels: &[bool],
) -> Result<DecisionMetrics, MetricsError> {
    if decisions.len() != labels.len() || decisions.is_empty() {
        return Err(MetricsError::LengthMismatch {
            decisions: decisions.len(),
            labels: labels.len(),
        });
    }
    let mut counts = DecisionOutcomeCounts::default();
    for (&decision, &label) in decisions.iter().zip(labels) {
        match (decision, label) {
            (true, true) => counts.true_yes += 1,
            (true, false) => counts.false_yes += 1,
            (false, false) => counts.true_no += 1,
            (false, true) => counts.false_no += 1,
        }
    }
    let n = counts.total();
    let accuracy = (counts.true_yes + counts.true_no) as f64 / n as f64;

    let precision_yes = ratio_or_zero(counts.true_yes, counts.true_yes + counts.false_yes);
    let recall_yes = ratio_or_zero(counts.true_yes, counts.true_yes + counts.false_no);
    let precision_no = ratio_or_zero(counts.true_no, counts.true_no + counts.false_no);
    let recall_no = ratio_or_zero(counts.true_no, counts.true_no + counts.false_yes);

    Ok(DecisionMetrics {
        accuracy,
        macro_precision: (precision_yes + precision_no) / 2.0,
        macro_recall: (recall_yes + recall_no) / 2.0,
        macro_f1: (class_f1(precision_yes, recall_yes) + class_f1(precision_no, recall_no)) / 2.0,
        counts,
    })
}
