use std::path::Path;

use clap::ValueEnum;
use litkg::experiment::{run_experiment, ExperimentConfig, Literals};
use litkg::ingest::EmrRecord;
use litkg::metrics::Metrics;
use litkg::model::Aggregator;
use litkg::{Error, Result};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    /// none / numeric / text / both
    Literals,
    /// residual connection off / on
    Residual,
    /// from scratch / pretrained
    Pretrain,
    /// number of propagation layers
    Depth,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Literals => "literals",
            Scenario::Residual => "residual",
            Scenario::Pretrain => "pretrain",
            Scenario::Depth => "depth",
        }
    }

    /// Cell labels with the config change each one applies.
    pub fn cells(self, depths: &[usize]) -> Vec<(String, Box<dyn Fn(&mut ExperimentConfig)>)> {
        match self {
            Scenario::Literals => Literals::ALL
                .into_iter()
                .map(|l| (l.name().to_string(), Box::new(move |c: &mut ExperimentConfig| c.literals = l) as Box<_>))
                .collect(),
            Scenario::Residual => [("off", false), ("on", true)]
                .into_iter()
                .map(|(n, on)| {
                    (n.to_string(), Box::new(move |c: &mut ExperimentConfig| c.model.residual_identity = on) as Box<_>)
                })
                .collect(),
            Scenario::Pretrain => [("scratch", false), ("pretrained", true)]
                .into_iter()
                .map(|(n, on)| {
                    let f = move |c: &mut ExperimentConfig| {
                        c.pretrain_enabled = on;
                        c.pretrained = None;
                    };
                    (n.to_string(), Box::new(f) as Box<_>)
                })
                .collect(),
            Scenario::Depth => depths
                .iter()
                .map(|&k| (format!("K={k}"), Box::new(move |c: &mut ExperimentConfig| c.model.layers = k) as Box<_>))
                .collect(),
        }
    }
}

/// Sample mean and standard deviation (n - 1 denominator; 0 for one value).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct CellSummary {
    pub scenario: String,
    pub cell: String,
    pub aggregator: String,
    pub seeds: usize,
    pub acc_mean: f64,
    pub acc_sd: f64,
    pub precision_mean: f64,
    pub precision_sd: f64,
    pub recall_mean: f64,
    pub recall_sd: f64,
    pub f1_mean: f64,
    pub f1_sd: f64,
}

impl CellSummary {
    fn new(scenario: Scenario, cell: &str, aggregator: Aggregator, runs: &[Metrics]) -> Self {
        let stat = |f: fn(&Metrics) -> f64| mean_sd(&runs.iter().map(f).collect::<Vec<_>>());
        let (acc_mean, acc_sd) = stat(|m| m.acc);
        let (precision_mean, precision_sd) = stat(|m| m.precision);
        let (recall_mean, recall_sd) = stat(|m| m.recall);
        let (f1_mean, f1_sd) = stat(|m| m.f1);
        Self {
            scenario: scenario.name().into(),
            cell: cell.into(),
            aggregator: aggregator.short_name().into(),
            seeds: runs.len(),
            acc_mean,
            acc_sd,
            precision_mean,
            precision_sd,
            recall_mean,
            recall_sd,
            f1_mean,
            f1_sd,
        }
    }
}

/// Runs every cell of the scenario for each aggregator and seed
/// `base.seed .. base.seed + seeds`, reporting test metrics.
pub fn run_ablation(
    records: &[EmrRecord],
    base: &ExperimentConfig,
    scenario: Scenario,
    aggregators: &[Aggregator],
    depths: &[usize],
    seeds: usize,
) -> Result<Vec<CellSummary>> {
    if seeds == 0 {
        return Err(Error::Config("ablation needs at least one seed".into()));
    }
    let mut out = Vec::new();
    for &agg in aggregators {
        for (label, apply) in scenario.cells(depths) {
            let mut runs = Vec::with_capacity(seeds);
            for s in 0..seeds as u64 {
                let mut cfg = base.clone();
                cfg.model.aggregator = agg;
                cfg.seed = base.seed + s;
                apply(&mut cfg);
                cfg.validate()?;
                log::info!("{} {label} {agg} seed {}", scenario.name(), cfg.seed);
                runs.push(run_experiment(records, &cfg)?.test);
            }
            out.push(CellSummary::new(scenario, &label, agg, &runs));
        }
    }
    Ok(out)
}

pub fn write_csv(path: &Path, rows: &[CellSummary]) -> Result<()> {
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        other => Error::Parse(format!("{}: {other:?}", path.display())),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
