//! A desk-scale toolkit for studying truncation sampling on symbolic-music
//! language models.
//!
//! The pipeline runs: scores in (ABC subset or JSON lines) -> REMI-style
//! token sequences -> a smoothed back-off n-gram model -> controlled model
//! degradation (temperature scaling, weight noise) -> truncation sampling
//! (conventional, nucleus, typical, top-k) -> objective metrics (mean
//! information content under an oracle, bar-lag self-similarity, scale
//! consistency). Every random choice flows through one seeded generator, so
//! any result reproduces from its configuration alone.

pub mod abc;
pub mod dist;
pub mod jsonl;
pub mod lm;
pub mod metrics;
pub mod rng;
pub mod sampling;
pub mod score;
pub mod split;
pub mod tokenizer;
pub mod toygen;

pub use dist::CategoricalDistribution;
pub use lm::{
    degrade_noise, degrade_temperature, evaluate_nll, train_ngram, LanguageModel, ModelDoc,
    NGramModel,
};
pub use metrics::{evaluate_sample_set, MetricsReport, SampleInput, DEFAULT_MAX_LAG};
pub use sampling::{
    default_max_len, generate, GenerationConfig, GenerationOutcome, SamplingStrategy, StopReason,
};
pub use score::{Bar, Note, Score, TimeSignature};
pub use split::{split_corpus, CorpusSplit};
pub use tokenizer::{decode, encode, DecodeMode, Token, TokenId, TokenSequence, Vocabulary};
pub use toygen::{generate_toy_corpus, FormSpec};

// Keep the guide's examples compiling: every chapter runs as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/scores-and-tokens.md")]
    mod scores_and_tokens {}
    #[doc = include_str!("../../../book/src/synthetic-corpora.md")]
    mod synthetic_corpora {}
    #[doc = include_str!("../../../book/src/language-models.md")]
    mod language_models {}
    #[doc = include_str!("../../../book/src/degradation.md")]
    mod degradation {}
    #[doc = include_str!("../../../book/src/truncation-sampling.md")]
    mod truncation_sampling {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/experiment-harness.md")]
    mod experiment_harness {}
}
