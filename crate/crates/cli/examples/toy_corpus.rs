//! Writes a synthetic tune corpus as score JSON lines, ready for
//! `ceol run`. Defaults match the corpus used throughout the guide.

use std::path::PathBuf;

use anyhow::{Context, Result};
use ceol_core::jsonl;
use ceol_core::score::TimeSignature;
use ceol_core::toygen::{generate_toy_corpus, FormSpec};
use clap::Parser;

#[derive(Parser)]
#[command(about = "Generate a synthetic tune corpus")]
struct Args {
    #[arg(long, default_value_t = 500)]
    tunes: usize,
    #[arg(long, default_value_t = 41)]
    seed: u64,
    /// Section layout; each distinct letter is one freshly drawn motif.
    #[arg(long, default_value = "AB")]
    form: String,
    #[arg(long, default_value_t = 2)]
    motif_bars: usize,
    /// Chance that a laid-out note is nudged a semitone off the scale.
    #[arg(long, default_value_t = 0.02)]
    mutation: f64,
    /// Major-key roots (pitch classes) to draw from, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    keys: Vec<u8>,
    #[arg(long)]
    output: PathBuf,
}

fn main() -> Result<()> {
    let args = Args::parse();
    let spec = FormSpec {
        form: args.form,
        motif_bars: args.motif_bars,
        time_signature: TimeSignature::new(4, 4),
        mutation_probability: args.mutation,
        key_roots: args.keys,
    };
    let scores = generate_toy_corpus(args.tunes, args.seed, &spec)?;
    jsonl::write_scores(&args.output, &scores)
        .with_context(|| format!("writing {}", args.output.display()))?;
    println!("wrote {} tunes to {}", scores.len(), args.output.display());
    Ok(())
}
