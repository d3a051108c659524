//! `ceol`: corpus preparation, n-gram training and truncation-sampling
//! experiments from the command line.

mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use ceol_core::jsonl;
use ceol_core::{
    abc, evaluate_sample_set, split_corpus, SampleInput, SamplingStrategy, Score, Vocabulary,
    DEFAULT_MAX_LAG,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{Degradation, ExperimentConfig, Overrides};
use pipeline::SampleMeta;

#[derive(Parser)]
#[command(
    name = "ceol",
    version,
    about = "Truncation-sampling experiments on symbolic-music language models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert ABC or score JSON lines into one unified score file.
    Ingest(IngestArgs),
    /// Partition a score file into train/validation/test.
    Split(SplitArgs),
    /// Train the smoothed n-gram model and write it with its vocabulary.
    Train(TrainArgs),
    /// Wrap a trained model file with a degradation.
    Degrade(DegradeArgs),
    /// Generate sequences from a model file.
    Sample(SampleArgs),
    /// Score a sample file against a reference partition.
    Evaluate(EvaluateArgs),
    /// Full pipeline: split, train, degrade, sample every grid cell, report.
    Run(GridArgs),
    /// Re-run the sampling grid against artifacts from an earlier `run`.
    Sweep(GridArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Input tune files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_enum)]
    format: IngestFormat,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum IngestFormat {
    Abc,
    Jsonl,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    output_dir: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Training partition (score JSON lines).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 4)]
    order: usize,
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    /// Extra score files whose tokens join the vocabulary, so held-out
    /// partitions encode without out-of-vocabulary gaps.
    #[arg(long, value_delimiter = ',')]
    vocab_scores: Vec<PathBuf>,
    /// Where to write the vocabulary JSON.
    #[arg(long)]
    vocab: PathBuf,
    /// Where to write the model JSON.
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct DegradeArgs {
    #[arg(long)]
    model: PathBuf,
    /// none | temperature:R | noise:K:SEED
    #[arg(long)]
    degradation: String,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    /// conventional | nucleus:T | typical:T | topk:K
    #[arg(long)]
    strategy: String,
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 256)]
    max_len: usize,
    /// Sequence JSON lines; a .meta.json sidecar lands next to it.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Oracle model file for information content (normally the base model).
    #[arg(long)]
    oracle: PathBuf,
    /// Reference scores (normally the test partition).
    #[arg(long)]
    reference: PathBuf,
    /// Generated sequences (JSON lines of token ids).
    #[arg(long)]
    samples: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MAX_LAG)]
    max_lag: usize,
    /// Report JSON destination; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    /// Experiment TOML file; every key can also arrive as a flag.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Split(args) => cmd_split(args),
        Command::Train(args) => cmd_train(args),
        Command::Degrade(args) => cmd_degrade(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Run(args) => {
            let config = ExperimentConfig::load(args.config.as_ref(), &args.overrides)?;
            pipeline::cmd_run(&config)
        }
        Command::Sweep(args) => {
            let config = ExperimentConfig::load(args.config.as_ref(), &args.overrides)?;
            pipeline::cmd_sweep(&config)
        }
    }
}

/// Parse errors are reported per tune and the run continues; only a run
/// that parses nothing at all fails.
fn cmd_ingest(args: IngestArgs) -> Result<()> {
    let mut ok = Vec::new();
    let mut failed = 0usize;
    for path in &args.inputs {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("ingest: reading {}", path.display()))?;
        match args.format {
            IngestFormat::Abc => {
                for (i, tune) in abc::parse_abc_tunes(&text).into_iter().enumerate() {
                    match tune {
                        Ok(score) => ok.push(score),
                        Err(err) => {
                            eprintln!("{}: tune {}: {err}", path.display(), i + 1);
                            failed += 1;
                        }
                    }
                }
            }
            IngestFormat::Jsonl => {
                for (i, line) in text.lines().enumerate() {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let parsed: Result<Score> = serde_json::from_str::<Score>(line)
                        .map_err(anyhow::Error::from)
                        .and_then(|score| {
                            score.validate()?;
                            Ok(score)
                        });
                    match parsed {
                        Ok(score) => ok.push(score),
                        Err(err) => {
                            eprintln!("{}:{}: {err:#}", path.display(), i + 1);
                            failed += 1;
                        }
                    }
                }
            }
        }
    }
    println!("{} ok, {} failed", ok.len(), failed);
    if ok.is_empty() {
        bail!("ingest: no tunes parsed");
    }
    jsonl::write_scores(&args.output, &ok).context("ingest")?;
    Ok(())
}

fn cmd_split(args: SplitArgs) -> Result<()> {
    let scores = jsonl::read_scores(&args.input).context("split")?;
    let split = split_corpus(&scores, args.seed).context("split")?;
    std::fs::create_dir_all(&args.output_dir)
        .with_context(|| format!("split: creating {}", args.output_dir.display()))?;
    jsonl::write_scores(&args.output_dir.join("train.jsonl"), &split.train).context("split")?;
    jsonl::write_scores(&args.output_dir.join("validation.jsonl"), &split.validation)
        .context("split")?;
    jsonl::write_scores(&args.output_dir.join("test.jsonl"), &split.test).context("split")?;
    jsonl::write_scores(&args.output_dir.join("discarded.jsonl"), &split.discarded)
        .context("split")?;
    println!(
        "{} train / {} validation / {} test / {} discarded",
        split.train.len(),
        split.validation.len(),
        split.test.len(),
        split.discarded.len()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let train_scores = jsonl::read_scores(&args.input).context("train")?;
    let mut vocab_scores = train_scores.clone();
    for path in &args.vocab_scores {
        vocab_scores.extend(jsonl::read_scores(path).context("train")?);
    }
    let vocab = Vocabulary::build(&vocab_scores);
    let sequences = pipeline::encode_all(&train_scores, &vocab).context("train")?;
    let model = ceol_core::train_ngram(&sequences, &vocab, args.order, args.alpha)
        .context("train")?;
    jsonl::write_vocabulary(&args.vocab, &vocab).context("train")?;
    let doc = model.to_doc();
    pipeline::write_json(&args.model, &doc).context("train")?;
    println!("trained {}, vocab {}", doc.describe(), vocab.len());
    Ok(())
}

fn cmd_degrade(args: DegradeArgs) -> Result<()> {
    let degradation: Degradation = args.degradation.parse().context("degrade")?;
    let base = pipeline::read_model(&args.model).context("degrade")?;
    let doc = pipeline::wrap_doc(&base, degradation);
    doc.clone().materialize().context("degrade")?;
    pipeline::write_json(&args.output, &doc).context("degrade")?;
    println!("wrote {} ({})", args.output.display(), doc.describe());
    Ok(())
}

fn cmd_sample(args: SampleArgs) -> Result<()> {
    let doc = pipeline::read_model(&args.model).context("sample")?;
    let tag = doc.describe();
    let strategy: SamplingStrategy = args.strategy.parse().context("sample")?;
    let model = doc.materialize().context("sample")?;
    let eos_id = model.vocab().eos_id();
    let (sequences, eos_rate, mean_len) =
        pipeline::generate_batch(model.as_ref(), strategy, args.n, args.seed, args.max_len, eos_id);
    jsonl::write_sequences(&args.output, &sequences).context("sample")?;
    let meta_path = args.output.with_extension("meta.json");
    pipeline::write_json(
        &meta_path,
        &SampleMeta {
            model: tag,
            strategy: strategy.to_string(),
            n: args.n,
            seed: args.seed,
            max_len: args.max_len,
            eos_rate,
            mean_len,
        },
    )
    .context("sample")?;
    println!("{} sequences, eos rate {eos_rate:.3}, mean length {mean_len:.1}", args.n);
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let doc = pipeline::read_model(&args.oracle).context("evaluate")?;
    let oracle = doc.materialize().context("evaluate")?;
    let reference = jsonl::read_scores(&args.reference).context("evaluate")?;
    let samples = jsonl::read_sequences(&args.samples).context("evaluate")?;
    let report = evaluate_sample_set(
        oracle.as_ref(),
        &reference,
        SampleInput::Sequences(&samples),
        args.max_lag,
    )
    .context("evaluate")?;
    match &args.output {
        Some(path) => {
            pipeline::write_json(path, &report).context("evaluate")?;
            println!(
                "mean_ic {:.4}, ss {:.4}, wellformed {:.3}",
                report.mean_ic, report.similarity.ss, report.wellformed_rate
            );
        }
        None => {
            let text = serde_json::to_string_pretty(&report).context("evaluate")?;
            println!("{text}");
        }
    }
    Ok(())
}
