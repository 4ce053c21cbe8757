//! Adaptive retrieval-augmented generation harness.
//!
//! The library decides per question whether to retrieve external documents
//! (constant, threshold, prompted, or time-aware policies), runs the
//! conditional RAG answer loop over pluggable model backends, and scores
//! both the retrieval decisions and the answers. Scripted backends and a
//! persistent response cache make every experiment reproducible offline.
//!
//! Module map:
//! - [`corpus`]: the benchmark data model and line-delimited loaders.
//! - [`metrics`]: answer normalization, token F1, loose match, IDK,
//!   two-class decision metrics.
//! - [`modelio`]: model clients (remote, scripted) and the response cache.
//! - [`retrieval`]: static per-question store and BM25 lexical index.
//! - [`decision`]: the retrieval-decision policies.
//! - [`prompts`]: byte-exact prompt templates.
//! - [`pipeline`]: the per-question loop, aggregation, filters, artifacts.

pub mod corpus;
pub mod decision;
pub mod metrics;
pub mod modelio;
pub mod pipeline;
pub mod prompts;
pub mod retrieval;
