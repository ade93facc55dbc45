//! End-to-end runs: data preparation, pretraining, fine-tuning, evaluation.

use std::collections::HashSet;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{build_kg, fit_numeric_on_records, AttributeVectors, EmrRecord, TextEmbedder, DEFAULT_NUMERIC_WIDTH, DEFAULT_TEXT_WIDTH};
use crate::kg::{split_three, EntityId, EntityKind, KnowledgeGraph, RelationKind, Triple};
use crate::metrics::Metrics;
use crate::model::{Dims, ModelConfig, ModelParams, PropagationGraph};
use crate::training::{
    build_finetune_pairs, evaluate_pairs, run_phase, sample_pretrain_examples, FinetunePair, HistoryEntry,
    PhaseTask, PretrainExample, TrainRunConfig,
};

/// Which literal modalities reach the gate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Literals {
    None,
    Numeric,
    Text,
    Both,
}

impl Literals {
    pub const ALL: [Literals; 4] = [Literals::None, Literals::Numeric, Literals::Text, Literals::Both];

    pub fn use_numeric(self) -> bool {
        matches!(self, Literals::Numeric | Literals::Both)
    }

    pub fn use_text(self) -> bool {
        matches!(self, Literals::Text | Literals::Both)
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown literal setting `{s}` (expected none, numeric, text or both)")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Literals::None => "none",
            Literals::Numeric => "numeric",
            Literals::Text => "text",
            Literals::Both => "both",
        }
    }
}

/// Everything that determines one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub pretrain: TrainRunConfig,
    pub finetune: TrainRunConfig,
    pub literals: Literals,
    /// Run the triplet pretraining phase before fine-tuning.
    pub pretrain_enabled: bool,
    /// Start from this checkpoint instead of a fresh initialization.
    pub pretrained: Option<PathBuf>,
    pub text_width: usize,
    pub numeric_width: usize,
    pub split: [f64; 3],
    /// Share of non-label triples hidden from both the message graph and
    /// pretraining, for checking the pretraining objective.
    pub holdout_fraction: f64,
    /// Share of pretraining triples used for its early stopping.
    pub pretrain_val_fraction: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            pretrain: TrainRunConfig { epochs: 10, lambda_reg: 0.0, ..Default::default() },
            finetune: TrainRunConfig::default(),
            literals: Literals::Both,
            pretrain_enabled: true,
            pretrained: None,
            text_width: DEFAULT_TEXT_WIDTH,
            numeric_width: DEFAULT_NUMERIC_WIDTH,
            split: [0.6, 0.2, 0.2],
            holdout_fraction: 0.0,
            pretrain_val_fraction: 0.05,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.pretrain.validate()?;
        self.finetune.validate()?;
        if self.text_width == 0 || self.numeric_width < 2 {
            return Err(Error::Config("text_width must be positive and numeric_width at least 2".into()));
        }
        for (name, f) in [("holdout_fraction", self.holdout_fraction), ("pretrain_val_fraction", self.pretrain_val_fraction)] {
            if !(0.0..0.5).contains(&f) {
                return Err(Error::Config(format!("{name} {f} outside [0, 0.5)")));
            }
        }
        if self.pretrained.is_some() && self.pretrain_enabled {
            log::info!("starting from a checkpoint; the pretraining phase is skipped");
        }
        Ok(())
    }

    fn stream_seed(&self, stream: u64) -> u64 {
        self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(stream)
    }
}

/// A corpus prepared for one seed: graph, literals, splits and examples.
pub struct Dataset {
    pub kg: KnowledgeGraph,
    pub attrs: AttributeVectors,
    /// Message-passing graph: every triple except record/disease links and
    /// held-out triples.
    pub graph: PropagationGraph,
    pub train_records: Vec<EntityId>,
    pub val_records: Vec<EntityId>,
    pub test_records: Vec<EntityId>,
    pub pretrain_train: Vec<Triple>,
    pub pretrain_val: Vec<PretrainExample>,
    pub holdout: Vec<Triple>,
    pub train_pairs: Vec<FinetunePair>,
    pub val_pairs: Vec<FinetunePair>,
    pub test_pairs: Vec<FinetunePair>,
}

impl Dataset {
    pub fn prepare(records: &[EmrRecord], cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let kg = build_kg(records)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.stream_seed(1));
        let (train_records, val_records, test_records) =
            split_three(kg.entities_of(EntityKind::MedicalRecord), cfg.split, &mut rng)?;
        let enc = fit_numeric_on_records(&kg, &train_records, cfg.numeric_width);
        let attrs = AttributeVectors::encode(&kg, &enc, &TextEmbedder::new(cfg.text_width))
            .with_literals(cfg.literals.use_numeric(), cfg.literals.use_text());

        let train_set: HashSet<EntityId> = train_records.iter().copied().collect();
        let val_set: HashSet<EntityId> = val_records.iter().copied().collect();
        let (mut labels, mut others): (Vec<Triple>, Vec<Triple>) =
            kg.triples().iter().partition(|t| t.relation == RelationKind::RecordDisease);
        others.shuffle(&mut rng);
        let n_holdout = (cfg.holdout_fraction * others.len() as f64).round() as usize;
        let holdout = others.split_off(others.len() - n_holdout);
        let graph = PropagationGraph::new(kg.num_entities(), &others)?;

        // pretraining sees the structure plus the training split's diagnoses
        let mut pretrain: Vec<Triple> = others;
        pretrain.extend(labels.iter().filter(|t| train_set.contains(&t.head)));
        pretrain.shuffle(&mut rng);
        let n_val = ((cfg.pretrain_val_fraction * pretrain.len() as f64).round() as usize).max(1).min(pretrain.len());
        let val_triples = pretrain.split_off(pretrain.len() - n_val);
        let pretrain_val = sample_pretrain_examples(&kg, &val_triples, cfg.pretrain.negatives, &mut rng)?;

        labels.sort_by_key(|t| (t.head, t.tail));
        let pick = |set: &dyn Fn(&EntityId) -> bool| labels.iter().filter(|t| set(&t.head)).copied().collect::<Vec<_>>();
        let train_pos = pick(&|h| train_set.contains(h));
        let val_pos = pick(&|h| val_set.contains(h));
        let test_pos = pick(&|h| !train_set.contains(h) && !val_set.contains(h));
        let k = cfg.finetune.negatives;
        let train_pairs = build_finetune_pairs(&kg, &train_pos, k, &mut rng)?;
        let val_pairs = build_finetune_pairs(&kg, &val_pos, k, &mut rng)?;
        let test_pairs = build_finetune_pairs(&kg, &test_pos, k, &mut rng)?;
        if train_pairs.is_empty() || val_pairs.is_empty() || test_pairs.is_empty() {
            return Err(Error::Contract("every split needs at least one record with a diagnosis".into()));
        }
        Ok(Self {
            kg,
            attrs,
            graph,
            train_records,
            val_records,
            test_records,
            pretrain_train: pretrain,
            pretrain_val,
            holdout,
            train_pairs,
            val_pairs,
            test_pairs,
        })
    }

    pub fn dims(&self) -> Dims {
        Dims { entities: self.kg.num_entities(), numeric: self.attrs.numeric_width(), text: self.attrs.text_width() }
    }

    pub fn pairs(&self, split: Split) -> &[FinetunePair] {
        match split {
            Split::Train => &self.train_pairs,
            Split::Val => &self.val_pairs,
            Split::Test => &self.test_pairs,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::Config(format!("unknown split `{s}` (expected train, val or test)"))),
        }
    }
}

pub struct PretrainRun {
    pub params: ModelParams,
    pub history: Vec<HistoryEntry>,
}

pub struct FinetuneRun {
    pub params: ModelParams,
    pub history: Vec<HistoryEntry>,
    pub val: Metrics,
    pub test: Metrics,
}

/// Fresh parameters, or the configured checkpoint after checking that it
/// fits this dataset.
pub fn initial_params(data: &Dataset, cfg: &ExperimentConfig) -> Result<ModelParams> {
    match &cfg.pretrained {
        Some(path) => {
            let p = ModelParams::load(path)?;
            if p.dims != data.dims() {
                return Err(Error::Config(format!(
                    "checkpoint {} was trained on dims {:?}, data has {:?}",
                    path.display(),
                    p.dims,
                    data.dims()
                )));
            }
            Ok(p)
        }
        None => ModelParams::init(&cfg.model, data.dims(), cfg.stream_seed(2)),
    }
}

pub fn pretrain(
    data: &Dataset,
    params: ModelParams,
    cfg: &ExperimentConfig,
    checkpoint: Option<&std::path::Path>,
    on_epoch: impl FnMut(&HistoryEntry),
) -> Result<PretrainRun> {
    let task = PhaseTask::Pretrain { kg: &data.kg, train: &data.pretrain_train, val: &data.pretrain_val };
    let run_cfg = TrainRunConfig { seed: cfg.stream_seed(3), ..cfg.pretrain.clone() };
    let out = run_phase(params, &data.graph, &data.attrs, &task, &run_cfg, checkpoint, on_epoch)?;
    Ok(PretrainRun { params: out.params, history: out.history })
}

pub fn finetune(
    data: &Dataset,
    params: ModelParams,
    cfg: &ExperimentConfig,
    checkpoint: Option<&std::path::Path>,
    on_epoch: impl FnMut(&HistoryEntry),
) -> Result<FinetuneRun> {
    let task = PhaseTask::Finetune { train: &data.train_pairs, val: &data.val_pairs };
    let run_cfg = TrainRunConfig { seed: cfg.stream_seed(4), ..cfg.finetune.clone() };
    let out = run_phase(params, &data.graph, &data.attrs, &task, &run_cfg, checkpoint, on_epoch)?;
    let val = evaluate_pairs(&out.params, &data.graph, &data.attrs, &data.val_pairs)?;
    let test = evaluate_pairs(&out.params, &data.graph, &data.attrs, &data.test_pairs)?;
    Ok(FinetuneRun { params: out.params, history: out.history, val, test })
}

/// Initialization, optional pretraining, fine-tuning and test evaluation.
pub fn run_experiment(records: &[EmrRecord], cfg: &ExperimentConfig) -> Result<FinetuneRun> {
    let data = Dataset::prepare(records, cfg)?;
    let mut params = initial_params(&data, cfg)?;
    let mut history = Vec::new();
    if cfg.pretrain_enabled && cfg.pretrained.is_none() {
        let run = pretrain(&data, params, cfg, None, |_| {})?;
        params = run.params;
        history = run.history;
    }
    let mut run = finetune(&data, params, cfg, None, |_| {})?;
    history.append(&mut run.history);
    run.history = history;
    Ok(run)
}
