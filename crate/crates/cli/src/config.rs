use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use litkg::experiment::{ExperimentConfig, Literals};
use litkg::model::Aggregator;
use litkg::synthgen::{SignalMode, SynthConfig};
use litkg::{Error, Result};
use serde::{Deserialize, Serialize};

/// Contents of a `--config` file. Experiment fields sit at the top level,
/// generator settings under `synth`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FileConfig {
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
    pub synth: SynthConfig,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AggregatorArg {
    Gcn,
    Sage,
    Bi,
    Gin,
}

impl From<AggregatorArg> for Aggregator {
    fn from(a: AggregatorArg) -> Self {
        match a {
            AggregatorArg::Gcn => Aggregator::Gcn,
            AggregatorArg::Sage => Aggregator::GraphSage,
            AggregatorArg::Bi => Aggregator::BiInteraction,
            AggregatorArg::Gin => Aggregator::Gin,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LiteralsArg {
    None,
    Numeric,
    Text,
    Both,
}

impl From<LiteralsArg> for Literals {
    fn from(l: LiteralsArg) -> Self {
        match l {
            LiteralsArg::None => Literals::None,
            LiteralsArg::Numeric => Literals::Numeric,
            LiteralsArg::Text => Literals::Text,
            LiteralsArg::Both => Literals::Both,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SignalArg {
    StructuralOnly,
    LiteralDependent,
}

impl From<SignalArg> for SignalMode {
    fn from(s: SignalArg) -> Self {
        match s {
            SignalArg::StructuralOnly => SignalMode::StructuralOnly,
            SignalArg::LiteralDependent => SignalMode::LiteralDependent,
        }
    }
}

/// Flags shared by every command. Anything given here overrides the
/// config file.
#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// JSON config file; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub aggregator: Option<AggregatorArg>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long, value_enum)]
    pub residual: Option<Switch>,
    #[arg(long, value_enum)]
    pub literals: Option<LiteralsArg>,
    /// Checkpoint directory to start from
    #[arg(long)]
    pub pretrained: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Common {
    pub fn resolve(&self) -> Result<FileConfig> {
        let mut cfg = match &self.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.experiment.seed = s;
            cfg.synth.seed = s;
        }
        if let Some(a) = self.aggregator {
            cfg.experiment.model.aggregator = a.into();
        }
        if let Some(k) = self.layers {
            cfg.experiment.model.layers = k;
        }
        if let Some(r) = self.residual {
            cfg.experiment.model.residual_identity = r == Switch::On;
        }
        if let Some(l) = self.literals {
            cfg.experiment.literals = l.into();
        }
        if let Some(p) = &self.pretrained {
            cfg.experiment.pretrained = Some(p.clone());
        }
        cfg.experiment.validate()?;
        cfg.synth.validate()?;
        Ok(cfg)
    }

    pub fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(dir)
    }
}
