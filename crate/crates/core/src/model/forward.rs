use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;

use super::config::{Aggregator, GinEpsilon, ModelConfig};
use super::graph::PropagationGraph;
use super::layers::{
    aggregate_neighborhood, apply_aggregator, attention_from_projected, dropout_mask, final_representation,
    fuse_literals, normalize_attention, residual_identity, AggregatorVars, GateVars, GinEps,
};
use super::params::{names, ModelParams};
use crate::error::{Error, Result};
use crate::ingest::AttributeVectors;
use crate::numerics::{Tape, Tensor, Var};

/// The parameters of a model recorded as named trainable leaves of a tape.
#[derive(Clone, Debug)]
pub struct Bound {
    vars: BTreeMap<String, Var>,
}

impl Bound {
    pub fn bind(tape: &Tape, params: &ModelParams) -> Self {
        let vars = params.store.iter().map(|(name, t)| (name.clone(), tape.param(name, t.clone()))).collect();
        Self { vars }
    }

    pub fn get(&self, name: &str) -> Result<Var> {
        self.vars.get(name).copied().ok_or_else(|| Error::Contract(format!("parameter `{name}` not bound")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Var)> {
        self.vars.iter()
    }

    pub fn gate(&self) -> Result<GateVars> {
        Ok(GateVars {
            w_e: self.get(names::GATE_E)?,
            w_n: self.get(names::GATE_N)?,
            w_t: self.get(names::GATE_T)?,
            b: self.get(names::GATE_B)?,
            v_e: self.get(names::GATE_VE)?,
            v_n: self.get(names::GATE_VN)?,
            v_t: self.get(names::GATE_VT)?,
        })
    }

    pub fn layer(&self, config: &ModelConfig, l: usize) -> Result<AggregatorVars> {
        let p = |n: &str| self.get(&names::layer(l, n));
        Ok(match config.aggregator {
            Aggregator::Gcn => AggregatorVars::Gcn { w: p("w")? },
            Aggregator::GraphSage => AggregatorVars::GraphSage { w: p("w")? },
            Aggregator::BiInteraction => AggregatorVars::BiInteraction { w1: p("w1")?, w2: p("w2")? },
            Aggregator::Gin => AggregatorVars::Gin {
                fc1_w: p("fc1.w")?,
                fc1_b: p("fc1.b")?,
                fc2_w: p("fc2.w")?,
                fc2_b: p("fc2.b")?,
                epsilon: match config.gin_epsilon {
                    GinEpsilon::Fixed(e) => GinEps::Fixed(e),
                    GinEpsilon::Learnable(_) => GinEps::Learnable(p("eps")?),
                },
            },
        })
    }
}

/// Fused layer-0 representations of every entity.
pub fn initial_representation(tape: &Tape, bound: &Bound, attrs: &AttributeVectors) -> Result<Var> {
    let e = bound.get(names::ENTITY)?;
    let rows = tape.value(e).rows();
    if attrs.num_entities() != rows {
        return Err(Error::Shape(format!(
            "attribute table has {} rows for {rows} entity embeddings",
            attrs.num_entities()
        )));
    }
    let n = tape.constant(attrs.numeric.clone());
    let t = tape.constant(attrs.text.clone());
    fuse_literals(tape, e, n, t, &bound.gate()?)
}

/// One attentive propagation layer `l` (0-based) from `h` to the next
/// representation, without dropout.
pub fn propagate_layer(
    tape: &Tape,
    bound: &Bound,
    config: &ModelConfig,
    graph: &PropagationGraph,
    h: Var,
    h0: Var,
    l: usize,
) -> Result<Var> {
    let w_att = bound.get(names::ATTENTION)?;
    let wh = tape.matmul(h, w_att)?;
    let r = tape.gather_rows(bound.get(names::RELATION)?, graph.relations())?;
    let scores = attention_from_projected(
        tape,
        tape.gather_rows(wh, graph.centers())?,
        r,
        tape.gather_rows(wh, graph.neighbors())?,
    )?;
    let weights = normalize_attention(tape, scores, graph)?;
    let h_n = aggregate_neighborhood(tape, h, weights, graph)?;
    let out = apply_aggregator(tape, h, h_n, &bound.layer(config, l)?)?;
    if config.residual_identity {
        let w = bound.get(&names::layer(l, "res.w"))?;
        residual_identity(tape, out, h0, config.alpha, config.beta(l + 1), w)
    } else {
        Ok(out)
    }
}

/// Runs fusion, the propagation stack and the output head for all
/// entities. Dropout is applied to layer outputs only when `dropout_rng`
/// is given.
pub fn forward(
    tape: &Tape,
    bound: &Bound,
    config: &ModelConfig,
    graph: &PropagationGraph,
    attrs: &AttributeVectors,
    mut dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<Var> {
    let h0 = initial_representation(tape, bound, attrs)?;
    if tape.value(h0).rows() != graph.num_entities() {
        return Err(Error::Shape(format!(
            "graph has {} entities, model has {}",
            graph.num_entities(),
            tape.value(h0).rows()
        )));
    }
    check_finite(tape, h0, 0)?;
    let mut h = h0;
    let mut outputs = Vec::with_capacity(config.layers);
    for l in 0..config.layers {
        h = propagate_layer(tape, bound, config, graph, h, h0, l)?;
        if let Some(rng) = dropout_rng.as_deref_mut() {
            if config.dropout > 0.0 {
                let mask = dropout_mask(tape.value(h).len(), config.dropout, rng);
                h = tape.mask(h, mask)?;
            }
        }
        check_finite(tape, h, l + 1)?;
        outputs.push(h);
    }
    let e = final_representation(tape, &outputs, bound.get(names::HEAD_W)?, bound.get(names::HEAD_B)?)?;
    check_finite(tape, e, config.layers + 1)?;
    Ok(e)
}

fn check_finite(tape: &Tape, v: Var, layer: usize) -> Result<()> {
    if tape.value(v).is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence(format!("non-finite activations at layer {layer}")))
    }
}

/// Final entity representations without recording gradients or dropout.
pub fn represent(params: &ModelParams, graph: &PropagationGraph, attrs: &AttributeVectors) -> Result<Tensor> {
    let tape = Tape::new();
    let bound = Bound::bind(&tape, params);
    let e = forward(&tape, &bound, &params.config, graph, attrs, None)?;
    let out = tape.value(e).clone();
    Ok(out)
}
