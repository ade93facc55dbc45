//! Literal fusion, attentive propagation and the representation head.

mod config;
mod forward;
mod graph;
mod layers;
mod params;

pub use config::{Aggregator, GinEpsilon, ModelConfig};
pub use forward::{forward, initial_representation, propagate_layer, represent, Bound};
pub use graph::{NormalizedAdjacency, PropagationGraph};
pub use layers::{
    aggregate_neighborhood, apply_aggregator, attention_from_projected, attention_scores, dropout_mask,
    final_representation, fuse_literals, normalize_attention, residual_identity, AggregatorVars, GateVars, GinEps,
};
pub use params::{names, Dims, ModelParams};
