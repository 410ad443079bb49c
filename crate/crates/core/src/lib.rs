//! Citation-based question answering over two knowledge sources.
//!
//! The pipeline pulls evidence from the web (search, fetch, paragraph
//! splitting plus span extraction, a two-tier rerank cascade and embedding
//! deduplication) and from a local knowledge graph (a beam search pruned by
//! embedding similarity, with no generator calls), then asks a generator
//! exactly once for an answer that cites the numbered references.
//!
//! - [`kg`]: TSV triple store with adjacency indices.
//! - [`tog`]: embedding-pruned beam search and subgraph serialization.
//! - [`web`]: search, page cache, splitter, evidence extraction, rerank, dedup.
//! - [`gateway`]: embedding / scoring / span / generation backends with call ledgers.
//! - [`composer`]: reference assembly, prompt templates, citation parsing.
//! - [`eval`]: Hits@1, citation analysis, annotation aggregation, dataset runs.
//! - [`pipeline`]: the end-to-end answer path shared by the CLI and the evaluator.
//!
//! Similarity math is generic over the scalar type (see [`scalar`]); the
//! aliases below fix it to `f64`, which is what the backends produce.

pub mod cli;
pub mod composer;
pub mod error;
pub mod eval;
pub mod gateway;
pub mod kg;
pub mod pipeline;
pub mod scalar;
pub mod text;
pub mod tog;
pub mod web;

pub use error::{Error, ErrorKind, Result};
pub use kg::{Direction, KnowledgeGraph, Triple};
pub use scalar::Scalar;

/// Scalar used throughout the binary and the default pipeline.
pub type Real = f64;

/// Reasoning path scored in [`Real`].
pub type ReasoningPath = tog::ReasoningPath<Real>;

/// Beam-search outcome scored in [`Real`].
pub type KgRetrieval = tog::KgRetrieval<Real>;

/// Schema version stamped on every JSON document the crate writes.
pub const SCHEMA_VERSION: u32 = 1;
