//! The `run` and `sweep` pipelines: staged artifacts on disk, a sampling
//! grid evaluated against the base-model oracle, one CSV row per cell.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ceol_core::jsonl;
use ceol_core::rng::{stable_hash, stable_hash_str};
use ceol_core::{
    default_max_len, encode, evaluate_nll, evaluate_sample_set, generate, split_corpus,
    GenerationConfig, LanguageModel, MetricsReport, ModelDoc, NGramModel, SampleInput, Score,
    SamplingStrategy, StopReason, TokenId, TokenSequence, Vocabulary,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Degradation, ExperimentConfig, StrategyCell};

pub const CSV_HEADER: &str =
    "model,degradation,strategy,tau,seed,n,mean_ic,ss,se,scale_consistency_mean,eos_rate,wellformed_rate";

/// Sidecar describing one generated sample file.
#[derive(Debug, Serialize)]
pub struct SampleMeta {
    pub model: String,
    pub strategy: String,
    pub n: usize,
    pub seed: u64,
    pub max_len: usize,
    pub eos_rate: f64,
    pub mean_len: f64,
}

/// Per-cell JSON detail: the metrics report plus enough provenance to
/// regenerate the cell standalone with `ceol sample --seed <seed>`.
#[derive(Debug, Serialize)]
struct CellReport<'a> {
    model: &'a str,
    degradation: String,
    strategy: String,
    tau: Option<f64>,
    seed: u64,
    max_len: usize,
    eos_rate: f64,
    mean_len: f64,
    metrics: &'a MetricsReport,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .with_context(|| format!("serializing {}", path.display()))?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_model(path: &Path) -> Result<ModelDoc> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn wrap_doc(base: &ModelDoc, degradation: Degradation) -> ModelDoc {
    match degradation {
        Degradation::None => base.clone(),
        Degradation::Temperature { r } => ModelDoc::Temperature {
            r,
            base: Box::new(base.clone()),
        },
        Degradation::Noise { k, seed } => ModelDoc::Noise {
            k,
            seed,
            base: Box::new(base.clone()),
        },
    }
}

pub fn encode_all(scores: &[Score], vocab: &Vocabulary) -> Result<Vec<TokenSequence>> {
    scores
        .iter()
        .map(|score| encode(score, vocab).map_err(anyhow::Error::from))
        .collect()
}

/// Generate `n` sequences with per-sequence seeds derived from `seed`.
/// Returns (sequences, eos rate, mean length).
pub fn generate_batch(
    model: &dyn LanguageModel,
    strategy: SamplingStrategy,
    n: usize,
    seed: u64,
    max_len: usize,
    eos_id: TokenId,
) -> (Vec<TokenSequence>, f64, f64) {
    let mut sequences = Vec::with_capacity(n);
    let mut eos = 0usize;
    let mut total_len = 0usize;
    for i in 0..n {
        let config = GenerationConfig {
            max_len,
            eos_id,
            seed: stable_hash(&[seed, i as u64]),
            strategy,
        };
        let (sequence, outcome) = generate(model, &config);
        if outcome.stop == StopReason::EosTerminated {
            eos += 1;
        }
        total_len += outcome.len;
        sequences.push(sequence);
    }
    let eos_rate = eos as f64 / n as f64;
    let mean_len = total_len as f64 / n as f64;
    (sequences, eos_rate, mean_len)
}

struct CellOutput {
    degradation: Degradation,
    cell: StrategyCell,
    seed: u64,
    sequences: Vec<TokenSequence>,
    eos_rate: f64,
    mean_len: f64,
    report: MetricsReport,
}

fn csv_field(value: Option<f64>) -> String {
    value.map_or_else(String::new, |v| v.to_string())
}

fn csv_row(model_tag: &str, out: &CellOutput) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        model_tag,
        out.degradation,
        out.cell.descriptor(),
        csv_field(out.cell.strategy.tau()),
        out.seed,
        out.report.n_samples,
        out.report.mean_ic,
        out.report.similarity.ss,
        csv_field(out.report.similarity.se),
        csv_field(out.report.scale_consistency_mean),
        out.eos_rate,
        out.report.wellformed_rate,
    )
}

fn write_status(dir: &Path, state: &str) -> Result<()> {
    fs::write(dir.join("STATUS"), format!("{state}\n"))
        .with_context(|| format!("writing {}", dir.join("STATUS").display()))
}

fn read_corpus(paths: &[PathBuf]) -> Result<Vec<Score>> {
    let mut scores = Vec::new();
    for path in paths {
        scores.extend(jsonl::read_scores(path).context("corpus")?);
    }
    if scores.is_empty() {
        bail!("corpus: no scores in the input files");
    }
    Ok(scores)
}

/// Full pipeline: split, train, degrade, sample the grid, report.
pub fn cmd_run(config: &ExperimentConfig) -> Result<()> {
    let out = &config.output_dir;
    fs::create_dir_all(out).with_context(|| format!("run: creating {}", out.display()))?;
    write_status(out, "incomplete")?;

    let scores = read_corpus(&config.corpus)?;
    println!(
        "corpus: {} scores from {} file(s)",
        scores.len(),
        config.corpus.len()
    );

    let split = split_corpus(&scores, config.split_seed).context("split")?;
    let splits_dir = out.join("splits");
    fs::create_dir_all(&splits_dir)
        .with_context(|| format!("split: creating {}", splits_dir.display()))?;
    jsonl::write_scores(&splits_dir.join("train.jsonl"), &split.train).context("split")?;
    jsonl::write_scores(&splits_dir.join("validation.jsonl"), &split.validation)
        .context("split")?;
    jsonl::write_scores(&splits_dir.join("test.jsonl"), &split.test).context("split")?;
    jsonl::write_scores(&splits_dir.join("discarded.jsonl"), &split.discarded)
        .context("split")?;
    println!(
        "split: {} train / {} validation / {} test / {} discarded",
        split.train.len(),
        split.validation.len(),
        split.test.len(),
        split.discarded.len()
    );

    // The vocabulary covers every retained partition so held-out scores
    // always encode.
    let mut retained = split.train.clone();
    retained.extend_from_slice(&split.validation);
    retained.extend_from_slice(&split.test);
    let vocab = Vocabulary::build(&retained);
    jsonl::write_vocabulary(&out.join("vocab.json"), &vocab).context("train")?;

    let encoded_train = encode_all(&split.train, &vocab).context("train")?;
    let base = ceol_core::train_ngram(&encoded_train, &vocab, config.order, config.alpha)
        .context("train")?;
    let base_doc = base.to_doc();
    let models_dir = out.join("models");
    fs::create_dir_all(&models_dir)
        .with_context(|| format!("train: creating {}", models_dir.display()))?;
    write_json(&models_dir.join("base.json"), &base_doc).context("train")?;
    println!("train: {}, vocab {}", base_doc.describe(), vocab.len());

    let encoded_validation = encode_all(&split.validation, &vocab).context("evaluate")?;
    let validation_nll = evaluate_nll(&base, &encoded_validation).context("evaluate")?;
    println!("validation NLL: {validation_nll:.4}");

    let max_len = config
        .max_len
        .unwrap_or_else(|| default_max_len(&split.train));

    let mut models: Vec<(Degradation, Box<dyn LanguageModel>)> = Vec::new();
    for &degradation in &config.degradations {
        let doc = wrap_doc(&base_doc, degradation);
        if degradation != Degradation::None {
            let path = models_dir.join(format!("{}.json", degradation.file_stem()));
            write_json(&path, &doc).context("degrade")?;
            println!("degrade: {degradation}");
        }
        models.push((degradation, doc.materialize().context("degrade")?));
    }

    run_grid(config, &base, &base_doc.describe(), &models, &split.test, max_len, out)?;
    write_status(out, "complete")
}

/// Grid only: reuse the split and models materialized by an earlier `run`.
pub fn cmd_sweep(config: &ExperimentConfig) -> Result<()> {
    let out = &config.output_dir;
    let base_doc = read_model(&out.join("models").join("base.json"))
        .context("sweep: missing artifacts (run `ceol run` first)")?;
    let base = match base_doc.clone() {
        ModelDoc::Ngram(doc) => NGramModel::from_doc(doc).context("sweep")?,
        _ => bail!("sweep: models/base.json is not a plain n-gram"),
    };
    let splits_dir = out.join("splits");
    let train = jsonl::read_scores(&splits_dir.join("train.jsonl")).context("sweep")?;
    let test = jsonl::read_scores(&splits_dir.join("test.jsonl")).context("sweep")?;

    let max_len = config.max_len.unwrap_or_else(|| default_max_len(&train));
    let mut models: Vec<(Degradation, Box<dyn LanguageModel>)> = Vec::new();
    for &degradation in &config.degradations {
        let doc = wrap_doc(&base_doc, degradation);
        models.push((degradation, doc.materialize().context("sweep")?));
    }

    write_status(out, "incomplete")?;
    run_grid(config, &base, &base_doc.describe(), &models, &test, max_len, out)?;
    write_status(out, "complete")
}

fn run_grid(
    config: &ExperimentConfig,
    oracle: &NGramModel,
    model_tag: &str,
    models: &[(Degradation, Box<dyn LanguageModel>)],
    test_scores: &[Score],
    max_len: usize,
    out: &Path,
) -> Result<()> {
    let eos_id = oracle.vocab().eos_id();
    let jobs: Vec<(Degradation, &Box<dyn LanguageModel>, &StrategyCell)> = models
        .iter()
        .flat_map(|(degradation, model)| {
            config
                .strategy_cells
                .iter()
                .map(move |cell| (*degradation, model, cell))
        })
        .collect();
    println!(
        "grid: {} cells x {} samples, max_len {}",
        jobs.len(),
        config.samples_per_cell,
        max_len
    );

    // Cells are independent; the output order is the grid order regardless
    // of which finishes first.
    let outputs = jobs
        .par_iter()
        .map(|(degradation, model, cell)| {
            run_cell(
                config,
                *degradation,
                model.as_ref(),
                cell,
                oracle,
                test_scores,
                max_len,
                eos_id,
            )
        })
        .collect::<Result<Vec<CellOutput>>>()?;

    let cells_dir = out.join("cells");
    fs::create_dir_all(&cells_dir)
        .with_context(|| format!("sample: creating {}", cells_dir.display()))?;
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for output in &outputs {
        let stem = format!(
            "{}__{}",
            output.degradation.file_stem(),
            output.cell.file_stem()
        );
        jsonl::write_sequences(&cells_dir.join(format!("{stem}.jsonl")), &output.sequences)
            .context("sample")?;
        write_json(
            &cells_dir.join(format!("{stem}.meta.json")),
            &SampleMeta {
                model: model_tag.to_string(),
                strategy: output.cell.descriptor(),
                n: output.sequences.len(),
                seed: output.seed,
                max_len,
                eos_rate: output.eos_rate,
                mean_len: output.mean_len,
            },
        )
        .context("sample")?;
        write_json(
            &cells_dir.join(format!("{stem}.report.json")),
            &CellReport {
                model: model_tag,
                degradation: output.degradation.to_string(),
                strategy: output.cell.descriptor(),
                tau: output.cell.strategy.tau(),
                seed: output.seed,
                max_len,
                eos_rate: output.eos_rate,
                mean_len: output.mean_len,
                metrics: &output.report,
            },
        )
        .context("evaluate")?;
        csv.push_str(&csv_row(model_tag, output));
        csv.push('\n');
    }

    let csv_path = out.join("results.csv");
    fs::write(&csv_path, csv)
        .with_context(|| format!("report: writing {}", csv_path.display()))?;
    println!("wrote {} ({} rows)", csv_path.display(), outputs.len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    config: &ExperimentConfig,
    degradation: Degradation,
    model: &dyn LanguageModel,
    cell: &StrategyCell,
    oracle: &NGramModel,
    test_scores: &[Score],
    max_len: usize,
    eos_id: TokenId,
) -> Result<CellOutput> {
    // The seed depends only on this cell's grid coordinates, so extending
    // the grid never perturbs existing cells.
    let seed = stable_hash(&[
        config.generation_seed,
        stable_hash_str(&degradation.to_string()),
        stable_hash_str(cell.family),
        cell.tau_index,
    ]);
    let (sequences, eos_rate, mean_len) = generate_batch(
        model,
        cell.strategy,
        config.samples_per_cell,
        seed,
        max_len,
        eos_id,
    );
    let report = evaluate_sample_set(
        oracle,
        test_scores,
        SampleInput::Sequences(&sequences),
        config.max_lag,
    )
    .with_context(|| format!("evaluate: cell {} {}", degradation, cell.descriptor()))?;
    Ok(CellOutput {
        degradation,
        cell: cell.clone(),
        seed,
        sequences,
        eos_rate,
        mean_len,
        report,
    })
}
