//! `qkge` command-line tool.
//!
//! Exit codes: 0 success, 1 usage or configuration, 2 data, 3 numeric or
//! training failure.

mod config;

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qkge::data::{Corruption, Split, Triple};
use qkge::eval::{evaluate, Report};
use qkge::scoring::{resource_estimate, score_single};
use qkge::train::{EpochRecord, Trainer};
use qkge::{Checkpoint, Dataset, Error, TiePolicy};

use crate::config::{ConfigError, ModelArgs, RunConfig, Side, Ties};

#[derive(Parser, Debug)]
#[command(name = "qkge", version, about = "Variational quantum knowledge graph embedding")]
struct Cli {
    /// More progress output on stderr
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only errors on stderr
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train embeddings and write checkpoints plus an epoch log
    Train(TrainArgs),
    /// Filtered link-prediction metrics for a checkpoint
    Eval(EvalArgs),
    /// Score one named triple
    Score(ScoreArgs),
    /// Qubit, gate and execution counts for batched versus sequential scoring
    Resources(ResourceArgs),
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Dataset directory with train.txt, valid.txt and optionally test.txt
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    /// Output directory for checkpoints and logs
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Keep Adam moments out of the checkpoints
    #[arg(long)]
    no_optimizer_state: bool,
    /// Worker threads for validation ranking (0 = all cores)
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    #[arg(long, value_name = "FILE")]
    ckpt: PathBuf,
    /// Split to rank: valid or test
    #[arg(long, default_value = "test")]
    split: String,
    /// Tie handling for the headline numbers
    #[arg(long, value_enum, default_value = "pessimistic")]
    ties: Ties,
    /// Which end to predict; only tail ranking matches the standard protocol
    #[arg(long, value_enum, default_value = "tail")]
    side: Side,
    /// Write the full report to DIR/metrics_<split>.json
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for ranking (0 = all cores)
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[arg(long, value_name = "FILE")]
    ckpt: PathBuf,
    head: String,
    relation: String,
    tail: String,
}

#[derive(Args, Debug)]
struct ResourceArgs {
    /// Triples per batch (power of two)
    #[arg(long, default_value_t = 4)]
    batch: usize,
    /// Data qubits per entity state
    #[arg(long, default_value_t = 4)]
    qubits: usize,
    /// Entity ansatz layers
    #[arg(long, default_value_t = 2)]
    layers: usize,
    /// Relation ansatz layers
    #[arg(long, default_value_t = 1)]
    relation_layers: usize,
    /// Training triples per epoch, for whole-run totals
    #[arg(long)]
    elements: Option<usize>,
    /// Epochs, for whole-run totals
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    /// Print JSON instead of a table
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Exit {
    Usage = 1,
    Data = 2,
    Numeric = 3,
}

#[derive(Debug)]
struct Failure {
    stage: &'static str,
    exit: Exit,
    message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.message)
    }
}

fn classify(e: &Error) -> Exit {
    match e {
        Error::Config(_) => Exit::Usage,
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::Lookup { .. }
        | Error::Checkpoint(_)
        | Error::Sampling(_) => Exit::Data,
        Error::Size(_)
        | Error::Circuit(_)
        | Error::Parameter(_)
        | Error::Dimension { .. }
        | Error::Contract(_)
        | Error::NonFinite { .. } => Exit::Numeric,
    }
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure>;
}

impl<T> Stage<T> for Result<T, Error> {
    fn stage(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            stage,
            exit: classify(&e),
            message: e.to_string(),
        })
    }
}

impl<T> Stage<T> for Result<T, ConfigError> {
    fn stage(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            stage,
            exit: Exit::Usage,
            message: e.to_string(),
        })
    }
}

fn io_failure(stage: &'static str, path: &Path, e: std::io::Error) -> Failure {
    Failure {
        stage,
        exit: Exit::Data,
        message: format!("{}: {e}", path.display()),
    }
}

struct Ui {
    level: i8,
}

impl Ui {
    fn info(&self, msg: impl fmt::Display) {
        if self.level >= 1 {
            eprintln!("{msg}");
        }
    }

    fn debug(&self, msg: impl fmt::Display) {
        if self.level >= 2 {
            eprintln!("{msg}");
        }
    }
}

fn set_threads(n: usize) {
    if n > 0 {
        // Fails only if the pool was already built.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn cmd_train(args: &TrainArgs, ui: &Ui) -> Result<(), Failure> {
    set_threads(args.threads);
    let config = args.model.resolve().stage("config")?;
    config.validate().stage("config")?;
    let ds = Dataset::load(&args.data).stage("loading dataset")?;
    ui.info(format_args!(
        "{}: {} entities, {} relations, {} train / {} valid / {} test triples",
        args.data.display(),
        ds.vocab.n_entities(),
        ds.vocab.n_relations(),
        ds.train.len(),
        ds.valid.len(),
        ds.test.len()
    ));

    std::fs::create_dir_all(&args.out).map_err(|e| io_failure("creating output", &args.out, e))?;
    let run = RunConfig {
        data: &args.data,
        out: &args.out,
        train: &config,
    };
    let echo = args.out.join("config.json");
    std::fs::write(&echo, serde_json::to_string_pretty(&run).expect("config serializes"))
        .map_err(|e| io_failure("writing config", &echo, e))?;

    let log_path = args.out.join("train_log.jsonl");
    let mut log = BufWriter::new(File::create(&log_path).map_err(|e| io_failure("opening log", &log_path, e))?);

    let mut trainer = Trainer::new(
        config.clone(),
        ds.vocab.n_entities(),
        ds.vocab.n_relations(),
        ds.train.clone(),
        ds.valid.clone(),
    )
    .stage("initializing")?;
    let with_optimizer = !args.no_optimizer_state;
    let snapshot = |t: &Trainer| {
        Checkpoint::new(&config, &ds.vocab, t.store(), t.epochs_done(), t.rng_state(), with_optimizer)
    };

    for _ in 0..config.epochs {
        let record: EpochRecord = trainer.run_epoch().stage("training")?;
        let line = serde_json::to_string(&record).expect("record serializes");
        writeln!(log, "{line}")
            .and_then(|_| log.flush())
            .map_err(|e| io_failure("writing log", &log_path, e))?;
        snapshot(&trainer)
            .save(args.out.join("latest.ckpt"))
            .stage("writing checkpoint")?;
        ui.info(format_args!(
            "epoch {:>3}  loss {:.6}  valid MRR {}  {} executions  {:.1}s",
            record.epoch,
            record.mean_loss,
            record.valid_mrr.map_or("-".into(), |m| format!("{m:.4}")),
            record.circuit_executions,
            record.wall_seconds
        ));
    }
    let final_path = args.out.join("final.ckpt");
    snapshot(&trainer).save(&final_path).stage("writing checkpoint")?;
    ui.info(format_args!("wrote {}", final_path.display()));
    Ok(())
}

fn cmd_eval(args: &EvalArgs, ui: &Ui) -> Result<(), Failure> {
    let split = args.split.parse::<Split>().stage("arguments")?;
    if split == Split::Train {
        return Err(Failure {
            stage: "arguments",
            exit: Exit::Usage,
            message: "evaluation split must be valid or test".into(),
        });
    }
    set_threads(args.threads);
    let ckpt = Checkpoint::load(&args.ckpt).stage("loading checkpoint")?;
    let store = ckpt.store().stage("loading checkpoint")?;
    let ds = Dataset::load_frozen(&args.data, &ckpt.vocabulary).stage("loading dataset")?;
    let triples = ds.split(split);
    if triples.is_empty() {
        return Err(Failure {
            stage: "loading dataset",
            exit: Exit::Data,
            message: format!("{} has no triples", ds.root.join(split.file_name()).display()),
        });
    }
    let known = ds.known();
    ui.debug(format_args!("ranking {} triples against {} entities", triples.len(), store.n_entities()));
    let eval = evaluate(triples, &store, &known, Corruption::from(args.side)).stage("ranking")?;
    let ties = TiePolicy::from(args.ties);
    let report = Report::new(&args.split, &eval, ties, &ckpt.vocabulary).stage("report")?;

    let m = &report.metrics;
    println!("split      {}", report.split);
    println!("ties       {}", serde_json::to_value(ties).expect("enum").as_str().unwrap_or("?"));
    println!("triples    {}", m.fraction.n_evaluated);
    println!("MRR        {:.4}  ({:.1})", m.fraction.mrr, m.percent.mrr);
    println!("Hits@1     {:.4}  ({:.1})", m.fraction.hits1, m.percent.hits1);
    println!("Hits@10    {:.4}  ({:.1})", m.fraction.hits10, m.percent.hits10);
    if ties == TiePolicy::Optimistic {
        let p = &report.pessimistic.fraction;
        println!("pessimistic MRR {:.4}  Hits@1 {:.4}  Hits@10 {:.4}", p.mrr, p.hits1, p.hits10);
    }

    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(|e| io_failure("writing report", dir, e))?;
        let path = dir.join(format!("metrics_{}.json", args.split));
        std::fs::write(&path, serde_json::to_string_pretty(&report).expect("report serializes"))
            .map_err(|e| io_failure("writing report", &path, e))?;
        ui.info(format_args!("wrote {}", path.display()));
    }
    Ok(())
}

fn nearest<'a>(names: &'a [String], wanted: &str) -> Vec<&'a str> {
    let mut scored: Vec<(usize, &str)> = names
        .iter()
        .map(|n| (strsim::levenshtein(n, wanted), n.as_str()))
        .collect();
    scored.sort();
    scored.into_iter().take(3).map(|(_, n)| n).collect()
}

fn lookup(names: &[String], found: Option<usize>, kind: &str, wanted: &str) -> Result<usize, Failure> {
    found.ok_or_else(|| Failure {
        stage: "lookup",
        exit: Exit::Data,
        message: format!(
            "unknown {kind} `{wanted}`; nearest: {}",
            nearest(names, wanted).join(", ")
        ),
    })
}

/// `x` with 12 significant digits.
fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x:.prec$}", prec = digits - 1);
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

fn cmd_score(args: &ScoreArgs) -> Result<(), Failure> {
    let ckpt = Checkpoint::load(&args.ckpt).stage("loading checkpoint")?;
    let store = ckpt.store().stage("loading checkpoint")?;
    let v = &ckpt.vocabulary;
    let h = lookup(v.entities(), v.entity_id(&args.head), "entity", &args.head)?;
    let r = lookup(v.relations(), v.relation_id(&args.relation), "relation", &args.relation)?;
    let t = lookup(v.entities(), v.entity_id(&args.tail), "entity", &args.tail)?;
    let delta = score_single(Triple::new(h, r, t), &store).stage("scoring")?;
    println!("{}", format_significant(delta, 12));
    Ok(())
}

fn cmd_resources(args: &ResourceArgs) -> Result<(), Failure> {
    let mut est = resource_estimate(args.batch, args.qubits, args.layers, args.relation_layers).stage("arguments")?;
    if let Some(n) = args.elements {
        est = est.with_workload(n, args.epochs);
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&est).expect("estimate serializes"));
        return Ok(());
    }
    println!("{:<28}{:>12}{:>12}", "", "batched", "sequential");
    println!("{:<28}{:>12}{:>12}", "triples per batch", est.batch_size, est.batch_size);
    println!("{:<28}{:>12}{:>12}", "data qubits", est.n_data_qubits, est.n_data_qubits);
    println!("{:<28}{:>12}{:>12}", "address qubits", est.n_address_qubits, 0);
    println!("{:<28}{:>12}{:>12}", "qubits total", est.qubits_total, est.n_data_qubits);
    println!("{:<28}{:>12}{:>12}", "circuit executions / batch", est.executions_batched, est.executions_sequential);
    println!("{:<28}{:>12}{:>12}", "gates / batch", est.gate_count, est.sequential_gate_count);
    println!("{:<28}{:>12}{:>12}", "parameters touched", est.parameters_touched, est.parameters_touched);
    println!("{:<28}{:>12}{:>12}", "entity state dimension", est.feature_dim, est.feature_dim);
    if let (Some(b), Some(s)) = (est.total_executions_batched, est.total_executions_sequential) {
        println!("{:<28}{:>12}{:>12}", "executions / run", b, s);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { Exit::Usage as u8 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let ui = Ui {
        level: if cli.quiet { 0 } else { 1 + cli.verbose as i8 },
    };
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a, &ui),
        Command::Eval(a) => cmd_eval(a, &ui),
        Command::Score(a) => cmd_score(a),
        Command::Resources(a) => cmd_resources(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_significant(0.123456789012345, 12), "0.123456789012");
        assert_eq!(format_significant(0.000123456789012345, 12), "0.000123456789012");
        assert_eq!(format_significant(1.0, 12), "1.00000000000");
        assert_eq!(format_significant(0.0, 12), "0.00000000000");
    }

    #[test]
    fn nearest_names() {
        let names: Vec<String> = ["alga", "algae", "mammal", "bird"].map(String::from).to_vec();
        assert_eq!(nearest(&names, "alge")[..2], ["alga", "algae"]);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
