use std::collections::BTreeMap;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::kg::{EntityId, RelationKind, Triple};
use crate::model::{names, Bound};
use crate::numerics::{Tape, Var};

/// `‖W_r·h + r − W_r·t‖²` for every triple, in input order; lower means
/// more plausible. `reps` holds one representation row per entity.
pub fn triplet_scores(tape: &Tape, reps: Var, bound: &Bound, triples: &[Triple]) -> Result<Var> {
    if triples.is_empty() {
        return Err(Error::Contract("no triples to score".into()));
    }
    let b = triples.len();
    let mut groups: BTreeMap<usize, (Vec<usize>, Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (pos, t) in triples.iter().enumerate() {
        let g = groups.entry(t.relation.index()).or_default();
        g.0.push(pos);
        g.1.push(t.head.index());
        g.2.push(t.tail.index());
    }
    let mut projected: Option<Var> = None;
    for (rel, (pos, heads, tails)) in groups {
        let rel = RelationKind::from_index(rel).expect("grouped by valid index");
        let w = bound.get(&names::projection(rel.symbol()))?;
        let diff = tape.sub(tape.gather_rows(reps, heads.into())?, tape.gather_rows(reps, tails.into())?)?;
        let part = tape.scatter_add_rows(tape.matmul(diff, w)?, pos.into(), b)?;
        projected = Some(match projected {
            None => part,
            Some(acc) => tape.add(acc, part)?,
        });
    }
    let rel_idx: Rc<[usize]> = triples.iter().map(|t| t.relation.index()).collect();
    let r = tape.gather_rows(bound.get(names::RELATION)?, rel_idx)?;
    Ok(tape.row_sq_norm(tape.add(projected.expect("at least one group"), r)?))
}

/// `λ·‖Θ‖²` over every bound parameter, or `None` when `λ = 0`.
pub fn l2_penalty(tape: &Tape, bound: &Bound, lambda: f64) -> Option<Var> {
    if lambda == 0.0 {
        return None;
    }
    let mut total: Option<Var> = None;
    for (_, &v) in bound.iter() {
        let sq = tape.sum_sq(v);
        total = Some(match total {
            None => sq,
            Some(acc) => tape.add(acc, sq).expect("scalars"),
        });
    }
    total.map(|t| tape.scale(t, lambda))
}

/// One positive triple with its corrupted-tail negatives.
#[derive(Clone, Debug, PartialEq)]
pub struct PretrainExample {
    pub positive: Triple,
    pub negatives: Vec<Triple>,
}

/// Mean over (positive, negative) pairs of `−ln σ(ŷ(neg) − ŷ(pos))`, plus
/// `λ·‖Θ‖²`.
pub fn pretrain_loss(tape: &Tape, reps: Var, bound: &Bound, batch: &[PretrainExample], lambda_reg: f64) -> Result<Var> {
    let mut triples = Vec::new();
    let mut pos_of_pair = Vec::new();
    let mut neg_of_pair = Vec::new();
    for ex in batch {
        let p = triples.len();
        triples.push(ex.positive);
        for n in &ex.negatives {
            pos_of_pair.push(p);
            neg_of_pair.push(triples.len());
            triples.push(*n);
        }
    }
    if pos_of_pair.is_empty() {
        return Err(Error::Contract("pretraining batch has no negative pairs".into()));
    }
    let scores = triplet_scores(tape, reps, bound, &triples)?;
    let pos = tape.gather_rows(scores, pos_of_pair.into())?;
    let neg = tape.gather_rows(scores, neg_of_pair.into())?;
    // −ln σ(x) = softplus(−x) with x = neg − pos
    let ranking = tape.mean(tape.softplus(tape.sub(pos, neg)?));
    match l2_penalty(tape, bound, lambda_reg) {
        Some(reg) => tape.add(ranking, reg),
        None => Ok(ranking),
    }
}

/// A record/disease candidate link and whether it holds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FinetunePair {
    pub record: EntityId,
    pub disease: EntityId,
    pub label: f64,
}

/// `sigmoid(FC(W_r·h ‖ W_r·t))` for each pair, using the record/disease
/// projection. FC is affine, Leaky ReLU, affine to width 1.
pub fn finetune_scores(tape: &Tape, reps: Var, bound: &Bound, pairs: &[FinetunePair]) -> Result<Var> {
    if pairs.is_empty() {
        return Err(Error::Contract("no pairs to score".into()));
    }
    let w = bound.get(&names::projection(RelationKind::RecordDisease.symbol()))?;
    let heads: Rc<[usize]> = pairs.iter().map(|p| p.record.index()).collect();
    let tails: Rc<[usize]> = pairs.iter().map(|p| p.disease.index()).collect();
    let h = tape.matmul(tape.gather_rows(reps, heads)?, w)?;
    let t = tape.matmul(tape.gather_rows(reps, tails)?, w)?;
    classifier(tape, bound, tape.concat_cols(&[h, t])?)
}

fn classifier(tape: &Tape, bound: &Bound, x: Var) -> Result<Var> {
    let hidden = tape.leaky_relu(tape.add_row(tape.matmul(x, bound.get(names::CLS_W1)?)?, bound.get(names::CLS_B1)?)?);
    let logit = tape.add_row(tape.matmul(hidden, bound.get(names::CLS_W2)?)?, bound.get(names::CLS_B2)?)?;
    Ok(tape.sigmoid(logit))
}

/// Mean binary cross-entropy of the pair probabilities. Unlike the
/// pretraining loss there is no weight penalty.
pub fn finetune_loss(tape: &Tape, probs: Var, pairs: &[FinetunePair]) -> Result<Var> {
    let labels: Rc<[f64]> = pairs.iter().map(|p| p.label).collect();
    tape.bce(probs, labels)
}
