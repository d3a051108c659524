//! Autoregressive language models over token sequences: the model
//! interface, held-out NLL evaluation, and a JSON container that
//! rematerializes trained and degraded models deterministically.

mod degrade;
mod ngram;

pub use degrade::{degrade_noise, degrade_temperature, DegradeError, NoiseModel, TemperatureModel};
pub use ngram::{train_ngram, NGramModel, TrainError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::CategoricalDistribution;
use crate::tokenizer::{TokenId, TokenSequence, Vocabulary};

/// An autoregressive next-token model. `next_dist` must be pure: equal
/// contexts always yield equal distributions, so concurrent generation
/// streams can share one model.
pub trait LanguageModel: Send + Sync {
    fn vocab(&self) -> &Vocabulary;
    fn next_dist(&self, context: &[TokenId]) -> CategoricalDistribution;
}

impl<M: LanguageModel + ?Sized> LanguageModel for Box<M> {
    fn vocab(&self) -> &Vocabulary {
        (**self).vocab()
    }

    fn next_dist(&self, context: &[TokenId]) -> CategoricalDistribution {
        (**self).next_dist(context)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum NllError {
    #[error("no scorable tokens in the evaluation set")]
    Empty,
    #[error("sequence {sequence}, position {position}: id {id} not in vocabulary")]
    OutOfVocabulary {
        sequence: usize,
        position: usize,
        id: TokenId,
    },
}

/// Mean per-token negative log-likelihood in nats. EOS positions count,
/// PAD positions do not.
pub fn evaluate_nll(
    model: &dyn LanguageModel,
    sequences: &[TokenSequence],
) -> Result<f64, NllError> {
    let vocab_size = model.vocab().len() as TokenId;
    let pad = model.vocab().pad_id();
    let mut total = 0.0;
    let mut count = 0u64;
    for (s, seq) in sequences.iter().enumerate() {
        for (t, &id) in seq.iter().enumerate() {
            if id >= vocab_size {
                return Err(NllError::OutOfVocabulary {
                    sequence: s,
                    position: t,
                    id,
                });
            }
            if id == pad {
                continue;
            }
            let dist = model.next_dist(&seq.ids()[..t]);
            total += dist.information_content(id);
            count += 1;
        }
    }
    if count == 0 {
        return Err(NllError::Empty);
    }
    Ok(total / count as f64)
}

/// On-disk model container. An n-gram stores its top-level count table
/// only; lower back-off levels are marginals and are rebuilt on load.
/// Degraded models wrap their base document and rematerialize from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelDoc {
    Ngram(NgramDoc),
    Temperature { r: f64, base: Box<ModelDoc> },
    Noise { k: f64, seed: u64, base: Box<ModelDoc> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgramDoc {
    pub order: usize,
    pub alpha: f64,
    pub vocab: Vocabulary,
    pub contexts: Vec<ContextDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextDoc {
    pub context: Vec<TokenId>,
    pub counts: Vec<(TokenId, u64)>,
}

#[derive(Debug, Error)]
pub enum ModelDocError {
    #[error("noise degradation requires a plain n-gram base model")]
    NoiseNeedsNgramBase,
    #[error(transparent)]
    BadNgram(#[from] TrainError),
    #[error(transparent)]
    BadDegradation(#[from] DegradeError),
}

impl ModelDoc {
    /// Short tag naming the degradation stack, outermost first.
    pub fn describe(&self) -> String {
        match self {
            ModelDoc::Ngram(doc) => format!("ngram-o{}-a{}", doc.order, doc.alpha),
            ModelDoc::Temperature { r, base } => format!("temperature:{r}({})", base.describe()),
            ModelDoc::Noise { k, seed, base } => format!("noise:{k}:{seed}({})", base.describe()),
        }
    }

    pub fn materialize(self) -> Result<Box<dyn LanguageModel>, ModelDocError> {
        match self {
            ModelDoc::Ngram(doc) => Ok(Box::new(NGramModel::from_doc(doc)?)),
            ModelDoc::Temperature { r, base } => {
                Ok(Box::new(degrade_temperature(base.materialize()?, r)?))
            }
            ModelDoc::Noise { k, seed, base } => match *base {
                ModelDoc::Ngram(doc) => {
                    Ok(Box::new(degrade_noise(NGramModel::from_doc(doc)?, k, seed)?))
                }
                _ => Err(ModelDocError::NoiseNeedsNgramBase),
            },
        }
    }
}
