mod ablate;
mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use litkg::experiment::{finetune, initial_params, pretrain, Dataset, ExperimentConfig, Split};
use litkg::ingest::{parse_records, write_records, EmrRecord, RecordFormat};
use litkg::metrics::Metrics;
use litkg::model::{Aggregator, ModelParams};
use litkg::synthgen::generate;
use litkg::training::{evaluate_pairs, HistoryEntry};
use litkg::{Error, Result};
use serde::Serialize;

use ablate::{run_ablation, write_csv, Scenario};
use config::{AggregatorArg, Common, SignalArg};

#[derive(Parser)]
#[command(name = "litkg", version, about = "Literal-aware knowledge-graph disease prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic record corpus
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        animals: Option<usize>,
        #[arg(long, value_enum)]
        signal: Option<SignalArg>,
    },
    /// Build the knowledge graph and literal vectors from a record file
    BuildKg {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        records: PathBuf,
    },
    /// Triplet pretraining; writes a checkpoint
    Pretrain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        records: PathBuf,
    },
    /// Record/disease link fine-tuning; writes a checkpoint and test metrics
    Finetune {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        records: PathBuf,
    },
    /// Metrics of a checkpoint on one split
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Run an ablation scenario over several seeds
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        records: PathBuf,
        #[arg(long, value_enum)]
        scenario: Scenario,
        #[arg(long, default_value_t = 3)]
        seeds: usize,
        /// Aggregators to cross with the scenario (default: the configured one)
        #[arg(long, value_enum, value_delimiter = ',')]
        aggregators: Vec<AggregatorArg>,
        /// Layer counts for the depth scenario
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        depths: Vec<usize>,
    },
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    code: u8,
    message: String,
}

fn classify(e: &Error) -> (&'static str, u8) {
    match e {
        Error::Config(_) => ("config", 1),
        Error::Io { .. } => ("io", 2),
        Error::Parse(_) | Error::Schema(_) | Error::Json(_) => ("input", 2),
        Error::Divergence(_) | Error::Training { .. } => ("divergence", 3),
        _ => ("internal", 1),
    }
}

fn load_records(path: &Path) -> Result<Vec<EmrRecord>> {
    let format = RecordFormat::from_path(path).unwrap_or(RecordFormat::Csv);
    let report = parse_records(path, format)?;
    for e in &report.errors {
        log::warn!("{}: row {} skipped: {}", path.display(), e.row, e.message);
    }
    Ok(report.records)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Appends history lines as epochs finish.
struct HistoryLog {
    path: PathBuf,
    out: BufWriter<File>,
    failed: Option<std::io::Error>,
}

impl HistoryLog {
    fn create(path: PathBuf) -> Result<Self> {
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self { path, out: BufWriter::new(f), failed: None })
    }

    fn push(&mut self, h: &HistoryEntry) {
        if self.failed.is_some() {
            return;
        }
        let line = serde_json::to_string(h).expect("history serializes");
        if let Err(e) = writeln!(self.out, "{line}") {
            self.failed = Some(e);
        }
    }

    fn finish(mut self) -> Result<()> {
        if let Some(e) = self.failed.take() {
            return Err(Error::io(&self.path, e));
        }
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

#[derive(Serialize)]
struct FinetuneMetrics {
    val: Metrics,
    test: Metrics,
}

#[derive(Serialize)]
struct SplitMetrics<'a> {
    split: &'a str,
    #[serde(flatten)]
    metrics: Metrics,
}

#[derive(Serialize)]
struct KgSummary {
    entities: usize,
    triples: usize,
    message_edges: usize,
    train_records: usize,
    val_records: usize,
    test_records: usize,
}

fn cmd_synth(common: &Common, animals: Option<usize>, signal: Option<SignalArg>) -> Result<()> {
    let mut cfg = common.resolve()?.synth;
    if let Some(n) = animals {
        cfg.n_animals = n;
    }
    if let Some(s) = signal {
        cfg.signal_mode = s.into();
    }
    let corpus = generate(&cfg)?;
    let out = common.out_dir()?;
    write_records(&out.join("records.csv"), &corpus.records, RecordFormat::Csv)?;
    write_json(&out.join("diseases.json"), &corpus.diseases)?;
    println!("{} records written to {}", corpus.records.len(), out.join("records.csv").display());
    Ok(())
}

fn cmd_build_kg(common: &Common, records: &Path) -> Result<()> {
    let cfg = common.resolve()?.experiment;
    let data = Dataset::prepare(&load_records(records)?, &cfg)?;
    let out = common.out_dir()?;
    data.kg.save(&out.join("kg.json"))?;
    data.attrs.save(&out.join("attributes.json"))?;
    let summary = KgSummary {
        entities: data.kg.num_entities(),
        triples: data.kg.num_triples(),
        message_edges: data.graph.num_edges(),
        train_records: data.train_records.len(),
        val_records: data.val_records.len(),
        test_records: data.test_records.len(),
    };
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

fn cmd_pretrain(common: &Common, records: &Path) -> Result<()> {
    let cfg = common.resolve()?.experiment;
    let data = Dataset::prepare(&load_records(records)?, &cfg)?;
    let out = common.out_dir()?;
    let ckpt = out.join("checkpoint");
    let params = initial_params(&data, &cfg)?;
    let mut log = HistoryLog::create(out.join("history.jsonl"))?;
    let run = pretrain(&data, params, &cfg, Some(&ckpt), |h| log.push(h))?;
    log.finish()?;
    run.params.save(&ckpt)?;
    println!("checkpoint written to {}", ckpt.display());
    Ok(())
}

fn cmd_finetune(common: &Common, records: &Path) -> Result<()> {
    let cfg = common.resolve()?.experiment;
    let data = Dataset::prepare(&load_records(records)?, &cfg)?;
    let out = common.out_dir()?;
    let ckpt = out.join("checkpoint");
    let params = initial_params(&data, &cfg)?;
    let mut log = HistoryLog::create(out.join("history.jsonl"))?;
    let run = finetune(&data, params, &cfg, Some(&ckpt), |h| log.push(h))?;
    log.finish()?;
    run.params.save(&ckpt)?;
    let metrics = FinetuneMetrics { val: run.val, test: run.test };
    write_json(&out.join("metrics.json"), &metrics)?;
    println!("{}", serde_json::to_string(&metrics)?);
    Ok(())
}

fn cmd_evaluate(common: &Common, records: &Path, checkpoint: &Path, split: &str) -> Result<()> {
    let which = Split::parse(split)?;
    let cfg: ExperimentConfig = common.resolve()?.experiment;
    let params = ModelParams::load(checkpoint)?;
    let data = Dataset::prepare(&load_records(records)?, &cfg)?;
    if params.dims != data.dims() {
        return Err(Error::Config(format!(
            "checkpoint dims {:?} do not match the data ({:?})",
            params.dims,
            data.dims()
        )));
    }
    let metrics = evaluate_pairs(&params, &data.graph, &data.attrs, data.pairs(which))?;
    let report = SplitMetrics { split, metrics };
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json(&dir.join(format!("metrics-{split}.json")), &report)?;
    }
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

fn cmd_ablate(
    common: &Common,
    records: &Path,
    scenario: Scenario,
    seeds: usize,
    aggregators: &[AggregatorArg],
    depths: &[usize],
) -> Result<()> {
    let cfg = common.resolve()?.experiment;
    let aggs: Vec<Aggregator> = if aggregators.is_empty() {
        vec![cfg.model.aggregator]
    } else {
        aggregators.iter().map(|&a| a.into()).collect()
    };
    let rows = run_ablation(&load_records(records)?, &cfg, scenario, &aggs, depths, seeds)?;
    let out = common.out_dir()?;
    write_csv(&out.join("ablation.csv"), &rows)?;
    println!("{:<10} {:<10} {:<5} {:>16} {:>16}", "scenario", "cell", "agg", "acc", "f1");
    for r in &rows {
        println!(
            "{:<10} {:<10} {:<5} {:>8.4} ± {:<6.4} {:>8.4} ± {:<6.4}",
            r.scenario, r.cell, r.aggregator, r.acc_mean, r.acc_sd, r.f1_mean, r.f1_sd
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Synth { common, animals, signal } => cmd_synth(common, *animals, *signal),
        Command::BuildKg { common, records } => cmd_build_kg(common, records),
        Command::Pretrain { common, records } => cmd_pretrain(common, records),
        Command::Finetune { common, records } => cmd_finetune(common, records),
        Command::Evaluate { common, records, checkpoint, split } => cmd_evaluate(common, records, checkpoint, split),
        Command::Ablate { common, records, scenario, seeds, aggregators, depths } => {
            cmd_ablate(common, records, *scenario, *seeds, aggregators, depths)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = classify(&e);
            let report = ErrorReport { error: kind, code, message: e.to_string() };
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_else(|_| e.to_string()));
            ExitCode::from(code)
        }
    }
}
