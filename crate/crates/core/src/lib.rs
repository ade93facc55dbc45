//! Literal-aware knowledge-graph embeddings for record-level disease
//! prediction.
//!
//! The pipeline reads medical records, builds a typed knowledge graph,
//! fuses each entity's numeric and text literals with its learned embedding
//! through a gate, propagates representations with relation-aware attention,
//! pretrains on a translation-style triplet ranking objective, and fine-tunes
//! a record/disease link classifier.

pub mod error;
pub mod experiment;
pub mod ingest;
pub mod kg;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod synthgen;
pub mod training;

pub use error::{Error, Result};
