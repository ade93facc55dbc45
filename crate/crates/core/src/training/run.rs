use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scoring::{finetune_loss, finetune_scores, pretrain_loss, triplet_scores, FinetunePair, PretrainExample};
use crate::error::{Error, Result};
use crate::ingest::AttributeVectors;
use crate::kg::{KnowledgeGraph, RelationKind, Triple};
use crate::metrics::{Metrics, DEFAULT_THRESHOLD};
use crate::model::{forward, represent, Bound, ModelParams, PropagationGraph};
use crate::numerics::{AdamState, Tape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Pretrain,
    Finetune,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Pretrain => "pretrain",
            Phase::Finetune => "finetune",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainRunConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub lr: f64,
    /// L2 weight of the pretraining loss; the fine-tuning loss has none.
    pub lambda_reg: f64,
    /// Corrupted tails per positive.
    pub negatives: usize,
    pub seed: u64,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        Self { batch_size: 1024, epochs: 50, patience: 5, lr: 1e-4, lambda_reg: 1e-5, negatives: 3, seed: 0 }
    }
}

impl TrainRunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.patience == 0 || self.negatives == 0 {
            return Err(Error::Config("batch_size, patience and negatives must be at least 1".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) || !(self.lambda_reg >= 0.0 && self.lambda_reg.is_finite()) {
            return Err(Error::Config("lr and lambda_reg must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// One line of training history. Pretraining reports pairwise ranking
/// accuracy as `acc` and leaves the classification metrics empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub phase: Phase,
    pub epoch: usize,
    pub loss: f64,
    pub val_loss: f64,
    pub acc: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub wall_ms: u64,
}

/// What to optimize in a phase.
pub enum PhaseTask<'a> {
    /// Triplet ranking over `train`, with fresh negatives drawn from `kg`
    /// every epoch; `val` carries fixed negatives.
    Pretrain { kg: &'a KnowledgeGraph, train: &'a [Triple], val: &'a [PretrainExample] },
    Finetune { train: &'a [FinetunePair], val: &'a [FinetunePair] },
}

impl PhaseTask<'_> {
    fn phase(&self) -> Phase {
        match self {
            PhaseTask::Pretrain { .. } => Phase::Pretrain,
            PhaseTask::Finetune { .. } => Phase::Finetune,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PhaseOutcome {
    /// Parameters of the best validation epoch.
    pub params: ModelParams,
    pub history: Vec<HistoryEntry>,
    pub best_epoch: usize,
}

/// Up to `k` corrupted-tail negatives for every positive; positives with
/// no possible corruption are dropped.
pub fn sample_pretrain_examples<R: Rng + ?Sized>(
    kg: &KnowledgeGraph,
    positives: &[Triple],
    k: usize,
    rng: &mut R,
) -> Result<Vec<PretrainExample>> {
    let mut out = Vec::with_capacity(positives.len());
    for p in positives {
        let available = kg.num_unlinked_tails(p.head, p.relation);
        if available == 0 {
            continue;
        }
        let negatives = kg.sample_negatives(p, k.min(available), rng)?;
        out.push(PretrainExample { positive: *p, negatives });
    }
    Ok(out)
}

/// One label-1 pair per record/disease triple and `negatives_per_positive`
/// label-0 pairs with diseases the record is not linked to.
pub fn build_finetune_pairs<R: Rng + ?Sized>(
    kg: &KnowledgeGraph,
    positives: &[Triple],
    negatives_per_positive: usize,
    rng: &mut R,
) -> Result<Vec<FinetunePair>> {
    let mut out = Vec::with_capacity(positives.len() * (1 + negatives_per_positive));
    for p in positives {
        if p.relation != RelationKind::RecordDisease || !kg.contains(p) {
            return Err(Error::Contract(format!("{p:?} is not a record/disease triple of the graph")));
        }
        out.push(FinetunePair { record: p.head, disease: p.tail, label: 1.0 });
        for n in kg.sample_negatives(p, negatives_per_positive, rng)? {
            out.push(FinetunePair { record: n.head, disease: n.tail, label: 0.0 });
        }
    }
    Ok(out)
}

pub fn predict_pairs(
    params: &ModelParams,
    graph: &PropagationGraph,
    attrs: &AttributeVectors,
    pairs: &[FinetunePair],
) -> Result<Vec<f64>> {
    let tape = Tape::new();
    let bound = Bound::bind(&tape, params);
    let reps = forward(&tape, &bound, &params.config, graph, attrs, None)?;
    let p = finetune_scores(&tape, reps, &bound, pairs)?;
    let out = tape.value(p).data().to_vec();
    Ok(out)
}

pub fn evaluate_pairs(
    params: &ModelParams,
    graph: &PropagationGraph,
    attrs: &AttributeVectors,
    pairs: &[FinetunePair],
) -> Result<Metrics> {
    let probs = predict_pairs(params, graph, attrs, pairs)?;
    let labels: Vec<f64> = pairs.iter().map(|p| p.label).collect();
    Metrics::evaluate(&probs, &labels, DEFAULT_THRESHOLD)
}

/// Triplet scores of `triples` under the trained representations.
pub fn score_triples(
    params: &ModelParams,
    graph: &PropagationGraph,
    attrs: &AttributeVectors,
    triples: &[Triple],
) -> Result<Vec<f64>> {
    let reps = represent(params, graph, attrs)?;
    let tape = Tape::new();
    let bound = Bound::bind(&tape, params);
    let r = tape.constant(reps);
    let s = triplet_scores(&tape, r, &bound, triples)?;
    let out = tape.value(s).data().to_vec();
    Ok(out)
}

struct Validation {
    loss: f64,
    acc: f64,
    metrics: Option<Metrics>,
}

fn validate(params: &ModelParams, graph: &PropagationGraph, attrs: &AttributeVectors, task: &PhaseTask) -> Result<Validation> {
    let tape = Tape::new();
    let bound = Bound::bind(&tape, params);
    let reps = forward(&tape, &bound, &params.config, graph, attrs, None)?;
    match task {
        PhaseTask::Pretrain { val, .. } => {
            let loss = tape.item(pretrain_loss(&tape, reps, &bound, val, 0.0)?);
            let triples: Vec<Triple> =
                val.iter().flat_map(|ex| std::iter::once(ex.positive).chain(ex.negatives.iter().copied())).collect();
            let scores = tape.value(triplet_scores(&tape, reps, &bound, &triples)?).data().to_vec();
            let (mut wins, mut total, mut at) = (0usize, 0usize, 0usize);
            for ex in val.iter() {
                let pos = scores[at];
                for j in 0..ex.negatives.len() {
                    wins += usize::from(pos < scores[at + 1 + j]);
                    total += 1;
                }
                at += 1 + ex.negatives.len();
            }
            Ok(Validation { loss, acc: wins as f64 / total.max(1) as f64, metrics: None })
        }
        PhaseTask::Finetune { val, .. } => {
            let probs = finetune_scores(&tape, reps, &bound, val)?;
            let loss = tape.item(finetune_loss(&tape, probs, val)?);
            let labels: Vec<f64> = val.iter().map(|p| p.label).collect();
            let m = Metrics::evaluate(tape.value(probs).data(), &labels, DEFAULT_THRESHOLD)?;
            Ok(Validation { loss, acc: m.acc, metrics: Some(m) })
        }
    }
}

/// Lexicographic comparison of (primary, secondary) validation scores.
fn improves(new: (f64, f64), best: (f64, f64)) -> bool {
    new.0 > best.0 || (new.0 == best.0 && new.1 > best.1)
}

/// Epoch loop with shuffled minibatches, Adam updates and early stopping
/// on validation loss (pretraining) or validation F1 with validation loss
/// as the tie-break (fine-tuning).
///
/// When `checkpoint` is given, the best parameters so far are written
/// there after every improving epoch, so a divergence leaves the last good
/// state on disk.
pub fn run_phase(
    params: ModelParams,
    graph: &PropagationGraph,
    attrs: &AttributeVectors,
    task: &PhaseTask,
    cfg: &TrainRunConfig,
    checkpoint: Option<&Path>,
    mut on_epoch: impl FnMut(&HistoryEntry),
) -> Result<PhaseOutcome> {
    cfg.validate()?;
    let phase = task.phase();
    let n_train = match task {
        PhaseTask::Pretrain { train, val, .. } => {
            if val.is_empty() {
                return Err(Error::Contract("pretraining needs validation triples".into()));
            }
            train.len()
        }
        PhaseTask::Finetune { train, val } => {
            if val.is_empty() {
                return Err(Error::Contract("fine-tuning needs validation pairs".into()));
            }
            train.len()
        }
    };
    if n_train == 0 {
        return Err(Error::Contract(format!("{phase} has no training examples")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(cfg.lr);
    let mut params = params;
    let mut best = params.clone();
    let mut best_epoch = 0;
    let mut best_value = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut stale = 0;
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..n_train).collect();

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let tape = Tape::new();
            let bound = Bound::bind(&tape, &params);
            let reps = forward(&tape, &bound, &params.config, graph, attrs, Some(&mut rng))?;
            let loss = match task {
                PhaseTask::Pretrain { kg, train, .. } => {
                    let picked: Vec<Triple> = chunk.iter().map(|&i| train[i]).collect();
                    let batch = sample_pretrain_examples(kg, &picked, cfg.negatives, &mut rng)?;
                    pretrain_loss(&tape, reps, &bound, &batch, cfg.lambda_reg)?
                }
                PhaseTask::Finetune { train, .. } => {
                    let batch: Vec<FinetunePair> = chunk.iter().map(|&i| train[i]).collect();
                    let probs = finetune_scores(&tape, reps, &bound, &batch)?;
                    finetune_loss(&tape, probs, &batch)?
                }
            };
            let value = tape.item(loss);
            if !value.is_finite() {
                return Err(Error::Divergence(format!("{phase} loss is {value} at epoch {epoch}, batch {b}")));
            }
            loss_sum += value * chunk.len() as f64;
            let grads = tape.backward(loss)?;
            adam.step(&mut params.store, &grads)?;
        }

        let v = validate(&params, graph, attrs, task)?;
        let entry = HistoryEntry {
            phase,
            epoch,
            loss: loss_sum / n_train as f64,
            val_loss: v.loss,
            acc: v.acc,
            precision: v.metrics.as_ref().map(|m| m.precision),
            recall: v.metrics.as_ref().map(|m| m.recall),
            f1: v.metrics.as_ref().map(|m| m.f1),
            wall_ms: started.elapsed().as_millis() as u64,
        };
        log::info!("{phase} epoch {epoch}: loss {:.5} val_loss {:.5} acc {:.4}", entry.loss, entry.val_loss, entry.acc);
        on_epoch(&entry);
        // F1 ties (a flat 0 before the classifier separates anything) fall
        // back to validation loss
        let score = match phase {
            Phase::Pretrain => (-v.loss, -v.loss),
            Phase::Finetune => (v.metrics.as_ref().map_or(0.0, |m| m.f1), -v.loss),
        };
        history.push(entry);
        if improves(score, best_value) {
            best_value = score;
            best_epoch = epoch;
            best = params.clone();
            stale = 0;
            if let Some(dir) = checkpoint {
                best.save(dir)?;
            }
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    if best_epoch == 0 {
        if let Some(dir) = checkpoint {
            best.save(dir)?;
        }
    }
    Ok(PhaseOutcome { params: best, history, best_epoch })
}
