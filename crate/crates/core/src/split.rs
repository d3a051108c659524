//! Length filtering and name-grouped corpus partitioning.
//!
//! The longest 5% of scores (measured in tokens of the canonical encoding)
//! are discarded first. The rest are grouped by exact name, the groups are
//! shuffled by seed, stably ordered largest first, and assigned whole to
//! whichever partition sits furthest below its 10/12, 1/12, 1/12 quota, so
//! a name never spans two partitions.

use std::cmp::Reverse;
use std::collections::BTreeMap;

use thiserror::Error;

use crate::rng::{stable_hash, StableRng};
use crate::score::Score;
use crate::tokenizer::encoded_len;

// Derivation tags so the discard tiebreak and the group shuffle never share
// a stream even under the same master seed.
const DISCARD_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;

pub const TRAIN_SHARE: f64 = 10.0 / 12.0;
pub const VALIDATION_SHARE: f64 = 1.0 / 12.0;
pub const TEST_SHARE: f64 = 1.0 / 12.0;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusSplit {
    pub train: Vec<Score>,
    pub validation: Vec<Score>,
    pub test: Vec<Score>,
    /// Scores removed by the 5%-longest filter, in removal order.
    pub discarded: Vec<Score>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SplitError {
    #[error("corpus is empty")]
    Empty,
    #[error("only {found} name groups after filtering; at least 12 are needed")]
    TooFewNames { found: usize },
}

pub fn split_corpus(scores: &[Score], seed: u64) -> Result<CorpusSplit, SplitError> {
    if scores.is_empty() {
        return Err(SplitError::Empty);
    }

    // Rank for discarding: longest first, ties by name, then by a seeded
    // value so equal entries still discard deterministically.
    let mut tiebreak_rng = StableRng::new(stable_hash(&[seed, DISCARD_STREAM]));
    let tiebreaks: Vec<u64> = scores.iter().map(|_| tiebreak_rng.next_u64()).collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by_key(|&i| {
        (
            Reverse(encoded_len(&scores[i])),
            scores[i].name.clone(),
            tiebreaks[i],
            i,
        )
    });

    let discard_count = scores.len() / 20;
    let mut is_discarded = vec![false; scores.len()];
    let mut discarded = Vec::with_capacity(discard_count);
    for &i in order.iter().take(discard_count) {
        is_discarded[i] = true;
        discarded.push(scores[i].clone());
    }

    let mut groups: BTreeMap<&str, Vec<&Score>> = BTreeMap::new();
    for (i, score) in scores.iter().enumerate() {
        if !is_discarded[i] {
            groups.entry(&score.name).or_default().push(score);
        }
    }
    if groups.len() < 12 {
        return Err(SplitError::TooFewNames {
            found: groups.len(),
        });
    }

    let mut groups: Vec<Vec<&Score>> = groups.into_values().collect();
    StableRng::new(stable_hash(&[seed, SHUFFLE_STREAM])).shuffle(&mut groups);
    groups.sort_by_key(|g| Reverse(g.len()));

    let retained: usize = groups.iter().map(|g| g.len()).sum();
    let quotas = [
        retained as f64 * TRAIN_SHARE,
        retained as f64 * VALIDATION_SHARE,
        retained as f64 * TEST_SHARE,
    ];
    let mut assigned = [0usize; 3];
    let mut partitions: [Vec<Score>; 3] = Default::default();
    for group in groups {
        let mut target = 0;
        for p in 1..3 {
            if quotas[p] - assigned[p] as f64 > quotas[target] - assigned[target] as f64 {
                target = p;
            }
        }
        assigned[target] += group.len();
        partitions[target].extend(group.into_iter().cloned());
    }
    let [train, validation, test] = partitions;
    Ok(CorpusSplit {
        train,
        validation,
        test,
        discarded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::{Bar, Note, TimeSignature};

    fn score(name: &str, notes_per_bar: usize) -> Score {
        let notes = (0..notes_per_bar)
            .map(|i| Note::new(60, i as u32 * 2, 1))
            .collect();
        Score::new(name, vec![Bar::new(TimeSignature::new(4, 4), notes)])
    }

    #[test]
    fn proportions_exact_for_unique_equal_scores() {
        // 1263 inputs lose 63 to the 5% filter; the 1200 retained uniquely
        // named scores then split exactly 1000/100/100.
        let scores: Vec<Score> = (0..1263).map(|i| score(&format!("tune-{i:04}"), 2)).collect();
        let split = split_corpus(&scores, 1).unwrap();
        assert_eq!(split.discarded.len(), 63);
        assert_eq!(split.train.len(), 1000);
        assert_eq!(split.validation.len(), 100);
        assert_eq!(split.test.len(), 100);
    }

    #[test]
    fn same_name_lands_in_one_partition() {
        // 44 scores discard 2; the two long ones soak that up so both
        // twins are retained.
        let mut scores: Vec<Score> = (0..40).map(|i| score(&format!("solo-{i}"), 1)).collect();
        scores.push(score("twin", 1));
        scores.push(score("twin", 1));
        scores.push(score("big-a", 5));
        scores.push(score("big-b", 5));
        let split = split_corpus(&scores, 9).unwrap();
        let holders = [&split.train, &split.validation, &split.test]
            .iter()
            .filter(|p| p.iter().any(|s| s.name == "twin"))
            .count();
        assert_eq!(holders, 1);
        let twins: usize = [&split.train, &split.validation, &split.test]
            .iter()
            .map(|p| p.iter().filter(|s| s.name == "twin").count())
            .sum();
        assert_eq!(twins, 2);
    }

    #[test]
    fn longest_scores_are_discarded() {
        let mut scores: Vec<Score> = (0..19).map(|i| score(&format!("short-{i}"), 1)).collect();
        scores.push(score("long", 10));
        let split = split_corpus(&scores, 5).unwrap();
        assert_eq!(split.discarded.len(), 1);
        assert_eq!(split.discarded[0].name, "long");
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let scores: Vec<Score> = (0..100).map(|i| score(&format!("t-{i}"), 1 + i % 3)).collect();
        let a = split_corpus(&scores, 42).unwrap();
        let b = split_corpus(&scores, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_move_names() {
        let scores: Vec<Score> = (0..100).map(|i| score(&format!("t-{i}"), 1)).collect();
        let a = split_corpus(&scores, 1).unwrap();
        let b = split_corpus(&scores, 2).unwrap();
        let names = |p: &[Score]| p.iter().map(|s| s.name.clone()).collect::<Vec<_>>();
        assert_ne!(names(&a.train), names(&b.train));
    }

    #[test]
    fn too_few_names_is_an_error() {
        let scores: Vec<Score> = (0..11).map(|i| score(&format!("t-{i}"), 1)).collect();
        assert_eq!(
            split_corpus(&scores, 1).unwrap_err(),
            SplitError::TooFewNames { found: 11 }
        );
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert_eq!(split_corpus(&[], 1).unwrap_err(), SplitError::Empty);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_corpus() -> impl Strategy<Value = Vec<Score>> {
            proptest::collection::vec(
                ("[a-e]{1,2}", 1usize..4),
                20..60,
            )
            .prop_map(|specs| {
                specs
                    .into_iter()
                    .map(|(name, notes)| score(&name, notes))
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn partitions_plus_discarded_cover_the_input(corpus in arb_corpus(), seed in 0u64..1000) {
                let split = match split_corpus(&corpus, seed) {
                    Ok(s) => s,
                    Err(SplitError::TooFewNames { .. }) => return Ok(()),
                    Err(e) => panic!("{e}"),
                };
                let mut got: Vec<String> = [&split.train, &split.validation, &split.test, &split.discarded]
                    .iter()
                    .flat_map(|p| p.iter().map(|s| format!("{}#{}", s.name, s.bars[0].notes.len())))
                    .collect();
                let mut want: Vec<String> = corpus
                    .iter()
                    .map(|s| format!("{}#{}", s.name, s.bars[0].notes.len()))
                    .collect();
                got.sort();
                want.sort();
                prop_assert_eq!(got, want);

                for (a, b) in [(&split.train, &split.validation), (&split.train, &split.test), (&split.validation, &split.test)] {
                    for s in a.iter() {
                        prop_assert!(!b.iter().any(|t| t.name == s.name), "name {} spans partitions", s.name);
                    }
                }
            }
        }
    }
}
