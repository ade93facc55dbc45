//! Typed knowledge-graph store: schema, triples, neighborhoods, negative
//! sampling, and dataset splitting.

mod graph;
mod schema;

pub use graph::{split_three, Entity, EntityId, KnowledgeGraph, Triple};
pub use schema::{AttributePayload, DirectedRelation, Direction, EntityKind, RelationKind, MISSING_NUMERIC};
