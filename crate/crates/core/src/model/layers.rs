//! The per-layer operations of the model, recorded on a [`Tape`].
//!
//! Entities are rows and weight matrices act on the right (`x·W`).

use std::rc::Rc;

use super::config::Aggregator;
use super::graph::PropagationGraph;
use crate::error::{Error, Result};
use crate::numerics::{Tape, Var};

/// Gate parameters of the literal fusion.
#[derive(Clone, Copy, Debug)]
pub struct GateVars {
    pub w_e: Var,
    pub w_n: Var,
    pub w_t: Var,
    pub b: Var,
    pub v_e: Var,
    pub v_n: Var,
    pub v_t: Var,
}

/// Weights of one propagation layer.
#[derive(Clone, Copy, Debug)]
pub enum AggregatorVars {
    Gcn { w: Var },
    GraphSage { w: Var },
    BiInteraction { w1: Var, w2: Var },
    Gin { fc1_w: Var, fc1_b: Var, fc2_w: Var, fc2_b: Var, epsilon: GinEps },
}

#[derive(Clone, Copy, Debug)]
pub enum GinEps {
    Fixed(f64),
    Learnable(Var),
}

impl AggregatorVars {
    pub fn kind(&self) -> Aggregator {
        match self {
            AggregatorVars::Gcn { .. } => Aggregator::Gcn,
            AggregatorVars::GraphSage { .. } => Aggregator::GraphSage,
            AggregatorVars::BiInteraction { .. } => Aggregator::BiInteraction,
            AggregatorVars::Gin { .. } => Aggregator::Gin,
        }
    }
}

/// `μ⊙ν + (1−μ)⊙e` with `μ = σ(e·W_E + n·W_N + t·W_T + b)` and
/// `ν = tanh((e‖n‖t)·W)`.
pub fn fuse_literals(tape: &Tape, e: Var, n: Var, t: Var, g: &GateVars) -> Result<Var> {
    let pre_mu = tape.add(tape.add(tape.matmul(e, g.w_e)?, tape.matmul(n, g.w_n)?)?, tape.matmul(t, g.w_t)?)?;
    let mu = tape.sigmoid(tape.add_row(pre_mu, g.b)?);
    let pre_nu = tape.add(tape.add(tape.matmul(e, g.v_e)?, tape.matmul(n, g.v_n)?)?, tape.matmul(t, g.v_t)?)?;
    let nu = tape.tanh(pre_nu);
    let gated = tape.mul(mu, nu)?;
    tape.add(gated, tape.mul(tape.one_minus(mu), e)?)
}

/// Raw attention `(W·t)ᵀ tanh(W·h + r)` for aligned rows of `h`, `r`, `t`.
pub fn attention_scores(tape: &Tape, h: Var, r: Var, t: Var, w_att: Var) -> Result<Var> {
    attention_from_projected(tape, tape.matmul(h, w_att)?, r, tape.matmul(t, w_att)?)
}

/// Attention given the already projected `W·h` and `W·t` rows.
pub fn attention_from_projected(tape: &Tape, wh: Var, r: Var, wt: Var) -> Result<Var> {
    let key = tape.tanh(tape.add(wh, r)?);
    tape.row_dot(wt, key)
}

/// Softmax of edge scores within each neighborhood.
pub fn normalize_attention(tape: &Tape, scores: Var, graph: &PropagationGraph) -> Result<Var> {
    tape.segment_softmax(scores, graph.offsets())
}

/// `h_N` for every entity: the attention-weighted sum of its neighbors'
/// rows of `h`. Entities without neighbors get a zero row.
pub fn aggregate_neighborhood(tape: &Tape, h: Var, weights: Var, graph: &PropagationGraph) -> Result<Var> {
    let msgs = tape.scale_rows(tape.gather_rows(h, graph.neighbors())?, weights)?;
    tape.scatter_add_rows(msgs, graph.centers(), graph.num_entities())
}

pub fn apply_aggregator(tape: &Tape, h: Var, h_n: Var, layer: &AggregatorVars) -> Result<Var> {
    Ok(match *layer {
        AggregatorVars::Gcn { w } => tape.leaky_relu(tape.matmul(tape.add(h, h_n)?, w)?),
        AggregatorVars::GraphSage { w } => tape.leaky_relu(tape.matmul(tape.concat_cols(&[h, h_n])?, w)?),
        AggregatorVars::BiInteraction { w1, w2 } => {
            let sum = tape.leaky_relu(tape.matmul(tape.add(h, h_n)?, w1)?);
            let prod = tape.leaky_relu(tape.matmul(tape.mul(h, h_n)?, w2)?);
            tape.add(sum, prod)?
        }
        AggregatorVars::Gin { fc1_w, fc1_b, fc2_w, fc2_b, epsilon } => {
            let own = match epsilon {
                GinEps::Fixed(e) => tape.scale(h, 1.0 + e),
                GinEps::Learnable(e) => tape.add(h, tape.scale_by(h, e)?)?,
            };
            let x = tape.add(own, h_n)?;
            let hidden = tape.leaky_relu(tape.add_row(tape.matmul(x, fc1_w)?, fc1_b)?);
            let out = tape.add_row(tape.matmul(hidden, fc2_w)?, fc2_b)?;
            tape.leaky_relu(out)
        }
    })
}

/// `σ[((1−α)·M + α·H⁰)·((1−β)·I + β·W)]`.
pub fn residual_identity(tape: &Tape, m: Var, h0: Var, alpha: f64, beta: f64, w: Var) -> Result<Var> {
    let mix = tape.add(tape.scale(m, 1.0 - alpha), tape.scale(h0, alpha))?;
    let mapped = tape.add(tape.scale(mix, 1.0 - beta), tape.scale(tape.matmul(mix, w)?, beta))?;
    Ok(tape.leaky_relu(mapped))
}

/// `σ(concat(h¹..hᴷ)·W_out + b_out)`.
pub fn final_representation(tape: &Tape, layers: &[Var], w_out: Var, b_out: Var) -> Result<Var> {
    if layers.is_empty() {
        return Err(Error::Contract("final representation needs at least one layer".into()));
    }
    let cat = if layers.len() == 1 { layers[0] } else { tape.concat_cols(layers)? };
    Ok(tape.leaky_relu(tape.add_row(tape.matmul(cat, w_out)?, b_out)?))
}

/// Inverted dropout mask: each entry kept with probability `1 − rate`
/// and rescaled by `1 / (1 − rate)`.
pub fn dropout_mask(len: usize, rate: f64, rng: &mut impl rand::Rng) -> Rc<[f64]> {
    let keep = 1.0 - rate;
    (0..len).map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    fn m(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn gcn_identity_weights_add() {
        let tape = Tape::new();
        let h = tape.constant(m(&[&[1.0, 2.0]]));
        let hn = tape.constant(m(&[&[0.5, 0.0]]));
        let w = tape.constant(Tensor::identity(2));
        let out = apply_aggregator(&tape, h, hn, &AggregatorVars::Gcn { w }).unwrap();
        assert_eq!(tape.value(out).data(), &[1.5, 2.0]);
    }

    #[test]
    fn gin_identity_fc_adds() {
        let tape = Tape::new();
        let h = tape.constant(m(&[&[1.0, 2.0]]));
        let hn = tape.constant(m(&[&[0.5, 3.0]]));
        let i = tape.constant(Tensor::identity(2));
        let z = tape.constant(Tensor::zeros(&[2]));
        let layer =
            AggregatorVars::Gin { fc1_w: i, fc1_b: z, fc2_w: i, fc2_b: z, epsilon: GinEps::Fixed(0.0) };
        let out = apply_aggregator(&tape, h, hn, &layer).unwrap();
        assert_eq!(tape.value(out).data(), &[1.5, 5.0]);
    }

    #[test]
    fn attention_with_zero_center_is_zero() {
        let tape = Tape::new();
        let h = tape.constant(m(&[&[0.0, 0.0, 0.0]]));
        let r = tape.constant(m(&[&[0.0, 0.0, 0.0]]));
        let t = tape.constant(m(&[&[3.0, -1.0, 2.0]]));
        let w = tape.constant(Tensor::identity(3));
        assert_eq!(tape.value(attention_scores(&tape, h, r, t, w).unwrap()).data(), &[0.0]);
    }

    #[test]
    fn attention_saturates_to_width() {
        let tape = Tape::new();
        let h = tape.constant(m(&[&[50.0, 50.0, 50.0, 50.0]]));
        let r = tape.constant(Tensor::zeros(&[1, 4]));
        let t = tape.constant(m(&[&[1.0, 1.0, 1.0, 1.0]]));
        let w = tape.constant(Tensor::identity(4));
        let s = tape.item(attention_scores(&tape, h, r, t, w).unwrap());
        assert!((s - 4.0).abs() < 1e-12);
    }

    #[test]
    fn final_representation_single_identity_layer() {
        let tape = Tape::new();
        let h = tape.constant(m(&[&[0.25, 1.0]]));
        let w = tape.constant(Tensor::identity(2));
        let b = tape.constant(Tensor::zeros(&[2]));
        let e = final_representation(&tape, &[h], w, b).unwrap();
        assert_eq!(tape.value(e).data(), &[0.25, 1.0]);
        let h2 = tape.constant(m(&[&[1.0, 1.0]]));
        let w4 = tape.constant(Tensor::zeros(&[4, 3]));
        let b3 = tape.constant(Tensor::zeros(&[3]));
        let e = final_representation(&tape, &[h, h2], w4, b3).unwrap();
        assert_eq!(tape.shape(e), vec![1, 3]);
    }

    #[test]
    fn residual_extremes() {
        let tape = Tape::new();
        let mm = tape.constant(m(&[&[2.0, -1.0]]));
        let h0 = tape.constant(m(&[&[0.5, -4.0]]));
        let w = tape.constant(m(&[&[0.0, 1.0], &[1.0, 0.0]]));
        let only_h0 = residual_identity(&tape, mm, h0, 1.0, 0.0, w).unwrap();
        assert_eq!(tape.value(only_h0).data(), &[0.5, -0.04]);
        let only_mw = residual_identity(&tape, mm, h0, 0.0, 1.0, w).unwrap();
        assert_eq!(tape.value(only_mw).data(), &[-0.01, 2.0]);
    }

    #[test]
    fn dropout_mask_rate() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mask = dropout_mask(10_000, 0.5, &mut rng);
        let kept = mask.iter().filter(|v| **v > 0.0).count();
        assert!((4_800..5_200).contains(&kept));
        assert!(mask.iter().all(|v| *v == 0.0 || *v == 2.0));
    }
}
