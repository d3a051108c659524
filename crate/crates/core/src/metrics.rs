//! Objective evaluation: per-token surprisal under an oracle model,
//! bar-lag structural similarity, and tonal scale consistency.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lm::{evaluate_nll, LanguageModel, NllError};
use crate::score::{Bar, Score};
use crate::tokenizer::{decode, encode, DecodeMode, TokenSequence, TokenizeError};
use crate::toygen::MAJOR_SCALE;

/// Largest bar lag entering the similarity profile unless overridden.
pub const DEFAULT_MAX_LAG: usize = 38;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MetricsError {
    #[error("sample set is empty")]
    EmptySampleSet,
    #[error("reference set is empty")]
    EmptyReference,
    #[error("no sample sequence decoded to a score")]
    NothingDecodable,
    #[error("profiles differ in length: {reference} vs {sample}")]
    ProfileLengthMismatch { reference: usize, sample: usize },
    #[error("score has no notes")]
    NoNotes,
    #[error(transparent)]
    Surprisal(#[from] NllError),
    #[error(transparent)]
    Encode(#[from] TokenizeError),
}

/// Per-token information content of one sequence under an oracle model.
/// PAD targets are excluded; EOS is a real event and counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurprisalProfile {
    pub per_token_ic: Vec<f64>,
    pub mean_ic: f64,
}

pub fn surprisal(
    oracle: &dyn LanguageModel,
    tokens: &TokenSequence,
) -> Result<SurprisalProfile, NllError> {
    let vocab_size = oracle.vocab().len() as u32;
    let pad = oracle.vocab().pad_id();
    let mut per_token_ic = Vec::with_capacity(tokens.len());
    for (position, &id) in tokens.ids().iter().enumerate() {
        if id >= vocab_size {
            return Err(NllError::OutOfVocabulary {
                sequence: 0,
                position,
                id,
            });
        }
        if id == pad {
            continue;
        }
        let dist = oracle.next_dist(&tokens.ids()[..position]);
        per_token_ic.push(dist.information_content(id));
    }
    if per_token_ic.is_empty() {
        return Err(NllError::Empty);
    }
    let mean_ic = per_token_ic.iter().sum::<f64>() / per_token_ic.len() as f64;
    Ok(SurprisalProfile {
        per_token_ic,
        mean_ic,
    })
}

/// Jaccard similarity of two bars' note sets, a note being the triple
/// (pitch, onset, duration). Two empty bars count as identical.
pub fn bar_similarity(a: &Bar, b: &Bar) -> f64 {
    let set_a: BTreeSet<_> = a.notes.iter().map(|n| n.identity()).collect();
    let set_b: BTreeSet<_> = b.notes.iter().map(|n| n.identity()).collect();
    let union = set_a.union(&set_b).count();
    if union == 0 {
        return 1.0;
    }
    set_a.intersection(&set_b).count() as f64 / union as f64
}

/// Mean over tunes of the un-normalized sum of bar similarities at each
/// lag 1..=max_lag. The inner sum is deliberately not divided by the pair
/// count, so entries can exceed 1; tunes shorter than lag+1 bars add 0.
pub fn lag_profile(scores: &[Score], max_lag: usize) -> Vec<f64> {
    assert!(!scores.is_empty(), "lag profile needs at least one score");
    assert!(max_lag >= 1, "max_lag must be at least 1");
    let mut profile = vec![0.0; max_lag];
    for score in scores {
        for (lag, entry) in profile.iter_mut().enumerate() {
            let lag = lag + 1;
            for pair in score.bars.windows(lag + 1) {
                *entry += bar_similarity(&pair[0], &pair[lag]);
            }
        }
    }
    for entry in &mut profile {
        *entry /= scores.len() as f64;
    }
    profile
}

pub fn self_similarity(profile: &[f64]) -> f64 {
    assert!(!profile.is_empty(), "profile must be non-empty");
    profile.iter().sum::<f64>() / profile.len() as f64
}

pub fn similarity_deviation(reference: &[f64], sample: &[f64]) -> Result<f64, MetricsError> {
    if reference.len() != sample.len() {
        return Err(MetricsError::ProfileLengthMismatch {
            reference: reference.len(),
            sample: sample.len(),
        });
    }
    let total: f64 = reference
        .iter()
        .zip(sample)
        .map(|(r, s)| (r - s).abs())
        .sum();
    Ok(total / reference.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleConsistencyResult {
    pub value: f64,
    /// Lowest root pitch class (0..12) achieving the maximum.
    pub best_root: u8,
}

/// Fraction of notes (with multiplicity) whose pitch class fits the best
/// of the 12 major-scale transpositions.
pub fn scale_consistency(score: &Score) -> Result<ScaleConsistencyResult, MetricsError> {
    let mut class_counts = [0u64; 12];
    let mut total = 0u64;
    for bar in &score.bars {
        for note in &bar.notes {
            class_counts[(note.pitch % 12) as usize] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(MetricsError::NoNotes);
    }
    let mut best = (0u64, 0u8);
    for root in 0..12u8 {
        let fitting: u64 = MAJOR_SCALE
            .iter()
            .map(|&step| class_counts[((root + step) % 12) as usize])
            .sum();
        if fitting > best.0 {
            best = (fitting, root);
        }
    }
    Ok(ScaleConsistencyResult {
        value: best.0 as f64 / total as f64,
        best_root: best.1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub lag_profile: Vec<f64>,
    pub ss: f64,
    /// Absent when no reference profile was supplied.
    pub se: Option<f64>,
}

impl SimilarityReport {
    pub fn max_lag(&self) -> usize {
        self.lag_profile.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_samples: usize,
    pub mean_ic: f64,
    pub similarity: SimilarityReport,
    /// One value per decodable sample that has at least one note.
    pub scale_consistency_values: Vec<f64>,
    pub scale_consistency_mean: Option<f64>,
    /// Mean per-sequence fraction of tokens consumed by lenient decoding;
    /// 1.0 when the input is already scores.
    pub wellformed_rate: f64,
}

/// Sample sets arrive either as raw generated token sequences (decoded
/// leniently here) or as already-structured scores.
#[derive(Debug, Clone, Copy)]
pub enum SampleInput<'a> {
    Sequences(&'a [TokenSequence]),
    Scores(&'a [Score]),
}

/// Assemble the full report for one sample set against a reference set.
/// Sequences that fail to decode count 0 toward well-formedness and are
/// skipped by the structural and tonal metrics.
pub fn evaluate_sample_set(
    oracle: &dyn LanguageModel,
    reference_scores: &[Score],
    samples: SampleInput<'_>,
    max_lag: usize,
) -> Result<MetricsReport, MetricsError> {
    if reference_scores.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    let vocab = oracle.vocab();

    let (sequences, decoded, rates) = match samples {
        SampleInput::Sequences(sequences) => {
            if sequences.is_empty() {
                return Err(MetricsError::EmptySampleSet);
            }
            let mut decoded = Vec::with_capacity(sequences.len());
            let mut rates = Vec::with_capacity(sequences.len());
            for sequence in sequences {
                match decode(sequence.ids(), vocab, DecodeMode::Lenient) {
                    Ok((score, report)) => {
                        decoded.push(score);
                        rates.push(report.rate);
                    }
                    Err(_) => rates.push(0.0),
                }
            }
            (sequences.to_vec(), decoded, rates)
        }
        SampleInput::Scores(scores) => {
            if scores.is_empty() {
                return Err(MetricsError::EmptySampleSet);
            }
            let sequences = scores
                .iter()
                .map(|score| encode(score, vocab))
                .collect::<Result<Vec<_>, _>>()?;
            (sequences, scores.to_vec(), vec![1.0; scores.len()])
        }
    };

    if decoded.is_empty() {
        return Err(MetricsError::NothingDecodable);
    }

    let mean_ic = evaluate_nll(oracle, &sequences)?;
    let wellformed_rate = rates.iter().sum::<f64>() / rates.len() as f64;

    let sample_profile = lag_profile(&decoded, max_lag);
    let reference_profile = lag_profile(reference_scores, max_lag);
    let ss = self_similarity(&sample_profile);
    let se = similarity_deviation(&reference_profile, &sample_profile)?;

    let scale_consistency_values: Vec<f64> = decoded
        .iter()
        .filter_map(|score| scale_consistency(score).ok())
        .map(|r| r.value)
        .collect();
    let scale_consistency_mean = if scale_consistency_values.is_empty() {
        None
    } else {
        Some(scale_consistency_values.iter().sum::<f64>() / scale_consistency_values.len() as f64)
    };

    Ok(MetricsReport {
        n_samples: rates.len(),
        mean_ic,
        similarity: SimilarityReport {
            lag_profile: sample_profile,
            ss,
            se: Some(se),
        },
        scale_consistency_values,
        scale_consistency_mean,
        wellformed_rate,
    })
}
