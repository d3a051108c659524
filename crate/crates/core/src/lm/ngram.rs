//! Count-based n-gram model with additive smoothing and hard back-off.
//!
//! Training windows are left-padded with PAD, so the empty generation
//! context resolves to the all-PAD window and start-of-sequence statistics
//! are learned like any others. A query walks from the longest padded
//! context window down to the unigram, stopping at the first level whose
//! window was seen in training; that level's counts are smoothed with
//! (count + alpha) / (total + alpha * (n - 1)) over the non-PAD vocabulary.
//! PAD itself always has probability zero.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dist::CategoricalDistribution;
use crate::lm::{ContextDoc, LanguageModel, ModelDoc, NgramDoc};
use crate::tokenizer::{TokenId, TokenSequence, Vocabulary};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct ContextCounts {
    pub total: u64,
    pub counts: BTreeMap<TokenId, u64>,
}

type LevelTable = BTreeMap<Vec<TokenId>, ContextCounts>;

#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    alpha: f64,
    vocab: Vocabulary,
    /// levels[k] maps context windows of length k to counts; level 0 is the
    /// unigram with its single empty-window entry.
    levels: Vec<LevelTable>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TrainError {
    #[error("order must be at least 1")]
    BadOrder,
    #[error("alpha must be positive, got {alpha}")]
    BadAlpha { alpha: f64 },
    #[error("no training tokens")]
    Empty,
    #[error("sequence {sequence}, position {position}: id {id} is not a valid target")]
    BadToken {
        sequence: usize,
        position: usize,
        id: TokenId,
    },
}

pub fn train_ngram(
    sequences: &[TokenSequence],
    vocab: &Vocabulary,
    order: usize,
    alpha: f64,
) -> Result<NGramModel, TrainError> {
    if order == 0 {
        return Err(TrainError::BadOrder);
    }
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(TrainError::BadAlpha { alpha });
    }
    let pad = vocab.pad_id();
    let context_len = order - 1;
    let mut top: LevelTable = BTreeMap::new();
    let mut saw_tokens = false;
    for (s, seq) in sequences.iter().enumerate() {
        for (t, &id) in seq.iter().enumerate() {
            if id == pad || id as usize >= vocab.len() {
                return Err(TrainError::BadToken {
                    sequence: s,
                    position: t,
                    id,
                });
            }
            saw_tokens = true;
            let window = padded_window(seq.ids(), t, context_len, pad);
            let cell = top.entry(window).or_default();
            cell.total += 1;
            *cell.counts.entry(id).or_default() += 1;
        }
    }
    if !saw_tokens {
        return Err(TrainError::Empty);
    }
    Ok(NGramModel::from_top_level(order, alpha, vocab.clone(), top))
}

/// The length-`len` context window ending just before position `t`,
/// left-padded with PAD.
fn padded_window(ids: &[TokenId], t: usize, len: usize, pad: TokenId) -> Vec<TokenId> {
    let available = t.min(len);
    let mut window = vec![pad; len - available];
    window.extend_from_slice(&ids[t - available..t]);
    window
}

impl NGramModel {
    /// Build all back-off levels from the top-level table. Each shorter
    /// level is the exact marginal of the one above it (every training
    /// position's length-k window is the suffix of its length-(k+1) window),
    /// so storing the top level alone reproduces the whole model.
    fn from_top_level(order: usize, alpha: f64, vocab: Vocabulary, top: LevelTable) -> Self {
        let mut levels = vec![LevelTable::new(); order];
        levels[order - 1] = top;
        for k in (0..order.saturating_sub(1)).rev() {
            let mut table = LevelTable::new();
            for (window, cell) in &levels[k + 1] {
                let suffix = window[window.len() - k..].to_vec();
                let entry = table.entry(suffix).or_default();
                entry.total += cell.total;
                for (&id, &c) in &cell.counts {
                    *entry.counts.entry(id).or_default() += c;
                }
            }
            levels[k] = table;
        }
        NGramModel {
            order,
            alpha,
            vocab,
            levels,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Longest seen padded context window for `context`, as
    /// (level, window, counts). Level 0 always matches, since its only
    /// window is empty.
    pub(crate) fn resolve_context(
        &self,
        context: &[TokenId],
    ) -> (usize, Vec<TokenId>, &ContextCounts) {
        let pad = self.vocab.pad_id();
        for len in (1..self.order).rev() {
            let window = padded_window(context, context.len(), len, pad);
            if let Some(cell) = self.levels[len].get(&window) {
                return (len, window, cell);
            }
        }
        let cell = self.levels[0]
            .get(&Vec::new())
            .expect("trained model always has the unigram level");
        (0, Vec::new(), cell)
    }

    /// Smoothed log-probability row for one context's counts. PAD gets
    /// -inf; everything else gets (count + alpha) / (total + alpha * V)
    /// with V the non-PAD vocabulary size. Rows sum to 1 by construction.
    pub(crate) fn smoothed_row(&self, cell: &ContextCounts) -> Vec<f64> {
        let effective_vocab = (self.vocab.len() - 1) as f64;
        let log_denominator = (cell.total as f64 + self.alpha * effective_vocab).ln();
        let unseen = self.alpha.ln() - log_denominator;
        let mut row = vec![unseen; self.vocab.len()];
        row[self.vocab.pad_id() as usize] = f64::NEG_INFINITY;
        for (&id, &count) in &cell.counts {
            row[id as usize] = (count as f64 + self.alpha).ln() - log_denominator;
        }
        row
    }

    pub(crate) fn levels(&self) -> &[LevelTable] {
        &self.levels
    }

    /// The model's parameters as one flat group per back-off level: every
    /// finite entry of every smoothed row, contexts in table order, token
    /// ids ascending. This is the view the noise degradation perturbs.
    pub fn parameter_tables(&self) -> Vec<Vec<f64>> {
        self.levels
            .iter()
            .map(|table| {
                table
                    .values()
                    .flat_map(|cell| {
                        self.smoothed_row(cell)
                            .into_iter()
                            .filter(|lp| lp.is_finite())
                            .collect::<Vec<f64>>()
                    })
                    .collect()
            })
            .collect()
    }

    pub fn to_doc(&self) -> ModelDoc {
        let contexts = self.levels[self.order - 1]
            .iter()
            .map(|(window, cell)| ContextDoc {
                context: window.clone(),
                counts: cell.counts.iter().map(|(&id, &c)| (id, c)).collect(),
            })
            .collect();
        ModelDoc::Ngram(NgramDoc {
            order: self.order,
            alpha: self.alpha,
            vocab: self.vocab.clone(),
            contexts,
        })
    }

    pub fn from_doc(doc: NgramDoc) -> Result<Self, TrainError> {
        if doc.order == 0 {
            return Err(TrainError::BadOrder);
        }
        if doc.alpha.is_nan() || doc.alpha <= 0.0 {
            return Err(TrainError::BadAlpha { alpha: doc.alpha });
        }
        let pad = doc.vocab.pad_id();
        let mut top = LevelTable::new();
        let mut saw_tokens = false;
        for (c, ctx) in doc.contexts.into_iter().enumerate() {
            let ids_ok = ctx.context.len() == doc.order - 1
                && ctx.context.iter().all(|&id| (id as usize) < doc.vocab.len());
            if !ids_ok {
                return Err(TrainError::BadToken {
                    sequence: c,
                    position: 0,
                    id: ctx.context.first().copied().unwrap_or(0),
                });
            }
            let cell = top.entry(ctx.context).or_default();
            for (p, (id, count)) in ctx.counts.into_iter().enumerate() {
                if id == pad || id as usize >= doc.vocab.len() || count == 0 {
                    return Err(TrainError::BadToken {
                        sequence: c,
                        position: p,
                        id,
                    });
                }
                saw_tokens = true;
                cell.total += count;
                *cell.counts.entry(id).or_default() += count;
            }
        }
        if !saw_tokens {
            return Err(TrainError::Empty);
        }
        Ok(Self::from_top_level(doc.order, doc.alpha, doc.vocab, top))
    }
}

impl LanguageModel for NGramModel {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_dist(&self, context: &[TokenId]) -> CategoricalDistribution {
        let (_, _, cell) = self.resolve_context(context);
        CategoricalDistribution::from_normalized_log_probs(self.smoothed_row(cell))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::Token;

    // PAD=0, EOS=1, "A"=2 (pitch 60), "B"=3 (pitch 62).
    fn abe_vocab() -> Vocabulary {
        Vocabulary::from_tokens(vec![
            Token::Pad,
            Token::Eos,
            Token::Pitch { pitch: 60 },
            Token::Pitch { pitch: 62 },
        ])
        .unwrap()
    }

    #[test]
    fn bigram_hand_count() {
        let vocab = abe_vocab();
        let model = train_ngram(&[TokenSequence(vec![2, 3, 1])], &vocab, 2, 1.0).unwrap();
        // count(A -> B) = 1, total(A) = 1, three non-PAD symbols:
        // q(B|A) = (1 + 1) / (1 + 3) = 0.5.
        let dist = model.next_dist(&[2]);
        assert!((dist.prob(3) - 0.5).abs() < 1e-12);
        assert!((dist.prob(1) - 0.25).abs() < 1e-12);
        assert!((dist.prob(2) - 0.25).abs() < 1e-12);
        assert_eq!(dist.prob(0), 0.0);
    }

    #[test]
    fn unigram_approaches_empirical_frequencies_as_alpha_vanishes() {
        let vocab = abe_vocab();
        let model = train_ngram(&[TokenSequence(vec![2, 3, 3, 1])], &vocab, 1, 1e-9).unwrap();
        let dist = model.next_dist(&[]);
        assert!((dist.prob(2) - 0.25).abs() < 1e-9);
        assert!((dist.prob(3) - 0.5).abs() < 1e-9);
        assert!((dist.prob(1) - 0.25).abs() < 1e-9);
    }

    #[test]
    fn training_is_deterministic() {
        let vocab = abe_vocab();
        let data = [TokenSequence(vec![2, 3, 1]), TokenSequence(vec![3, 3, 1])];
        let a = train_ngram(&data, &vocab, 3, 0.5).unwrap();
        let b = train_ngram(&data, &vocab, 3, 0.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unseen_context_backs_off() {
        let vocab = abe_vocab();
        let model = train_ngram(&[TokenSequence(vec![2, 3, 1])], &vocab, 3, 1.0).unwrap();
        // [3, 2] was never seen, but [2] was: the query must land on the
        // same row as the bigram context.
        let backed_off = model.next_dist(&[3, 2]);
        let (level, window, _) = model.resolve_context(&[3, 2]);
        assert_eq!((level, window), (1, vec![2]));
        let direct = model.resolve_context(&[2]);
        assert_eq!(backed_off.log_probs(), model.smoothed_row(direct.2));
    }

    #[test]
    fn start_context_uses_pad_windows() {
        let vocab = abe_vocab();
        let model = train_ngram(&[TokenSequence(vec![2, 3, 1])], &vocab, 2, 0.01).unwrap();
        // Window [PAD] was trained with the sequence-initial token.
        let dist = model.next_dist(&[]);
        assert_eq!(dist.argmax(), 2);
        let (level, window, _) = model.resolve_context(&[]);
        assert_eq!((level, window), (1, vec![0]));
    }

    #[test]
    fn every_reachable_context_is_normalized() {
        let vocab = abe_vocab();
        let model = train_ngram(
            &[TokenSequence(vec![2, 3, 1]), TokenSequence(vec![3, 2, 1])],
            &vocab,
            3,
            0.3,
        )
        .unwrap();
        let ids: Vec<TokenId> = (0..vocab.len() as TokenId).collect();
        let mut contexts: Vec<Vec<TokenId>> = vec![vec![]];
        for &a in &ids {
            contexts.push(vec![a]);
            for &b in &ids {
                contexts.push(vec![a, b]);
            }
        }
        for ctx in contexts {
            let dist = model.next_dist(&ctx);
            assert!(
                (dist.total_probability() - 1.0).abs() < 1e-9,
                "context {ctx:?}"
            );
            assert_eq!(dist.prob(0), 0.0, "context {ctx:?}");
        }
    }

    #[test]
    fn doc_round_trip() {
        let vocab = abe_vocab();
        let data = [TokenSequence(vec![2, 3, 1]), TokenSequence(vec![2, 2, 1])];
        let model = train_ngram(&data, &vocab, 3, 0.25).unwrap();
        let json = serde_json::to_string(&model.to_doc()).unwrap();
        let doc: ModelDoc = serde_json::from_str(&json).unwrap();
        let ModelDoc::Ngram(ngram_doc) = doc else {
            panic!("expected an ngram doc");
        };
        assert_eq!(NGramModel::from_doc(ngram_doc).unwrap(), model);
    }

    #[test]
    fn invalid_training_inputs_error() {
        let vocab = abe_vocab();
        let seq = [TokenSequence(vec![2, 1])];
        assert_eq!(
            train_ngram(&seq, &vocab, 0, 1.0).unwrap_err(),
            TrainError::BadOrder
        );
        assert!(matches!(
            train_ngram(&seq, &vocab, 2, 0.0).unwrap_err(),
            TrainError::BadAlpha { .. }
        ));
        assert_eq!(
            train_ngram(&[], &vocab, 2, 1.0).unwrap_err(),
            TrainError::Empty
        );
        assert!(matches!(
            train_ngram(&[TokenSequence(vec![2, 0])], &vocab, 2, 1.0).unwrap_err(),
            TrainError::BadToken { position: 1, .. }
        ));
        assert!(matches!(
            train_ngram(&[TokenSequence(vec![7])], &vocab, 2, 1.0).unwrap_err(),
            TrainError::BadToken { id: 7, .. }
        ));
    }

    #[test]
    fn parameter_tables_flatten_per_level() {
        let vocab = abe_vocab();
        let model = train_ngram(&[TokenSequence(vec![2, 3, 1])], &vocab, 2, 1.0).unwrap();
        let tables = model.parameter_tables();
        assert_eq!(tables.len(), 2);
        // Unigram: one context row with 3 finite entries.
        assert_eq!(tables[0].len(), 3);
        // Bigram: windows [PAD], [2], [3] -> 9 finite entries.
        assert_eq!(tables[1].len(), 9);
        for level in &tables {
            assert!(level.iter().all(|lp| lp.is_finite() && *lp < 0.0));
        }
    }
}
