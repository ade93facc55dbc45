//! Triplet pretraining and record/disease link fine-tuning.

mod run;
mod scoring;

pub use run::{
    build_finetune_pairs, evaluate_pairs, predict_pairs, run_phase, sample_pretrain_examples, score_triples,
    HistoryEntry, Phase, PhaseOutcome, PhaseTask, TrainRunConfig,
};
pub use scoring::{
    finetune_loss, finetune_scores, l2_penalty, pretrain_loss, triplet_scores, FinetunePair, PretrainExample,
};
