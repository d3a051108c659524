//! Model degradations: temperature flattening and fixed parameter noise.
//!
//! Both wrap a base model and change only its conditional distributions.
//! Temperature divides log-probabilities by r and renormalizes, which
//! preserves the probability ordering and raises entropy for r > 1. Noise
//! adds k * z to every smoothed log-probability entry, where z is a
//! Gaussian with the standard deviation of the entry's back-off level,
//! drawn once per entry as a pure function of the noise seed.

use thiserror::Error;

use crate::dist::CategoricalDistribution;
use crate::lm::{LanguageModel, NGramModel};
use crate::rng::{stable_hash, StableRng};
use crate::tokenizer::{TokenId, Vocabulary};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DegradeError {
    #[error("temperature must be positive, got {r}")]
    BadTemperature { r: f64 },
    #[error("noise scale must be non-negative, got {k}")]
    BadNoiseScale { k: f64 },
}

pub struct TemperatureModel {
    base: Box<dyn LanguageModel>,
    r: f64,
}

pub fn degrade_temperature(
    base: impl LanguageModel + 'static,
    r: f64,
) -> Result<TemperatureModel, DegradeError> {
    if !r.is_finite() || r <= 0.0 {
        return Err(DegradeError::BadTemperature { r });
    }
    Ok(TemperatureModel {
        base: Box::new(base),
        r,
    })
}

impl TemperatureModel {
    pub fn r(&self) -> f64 {
        self.r
    }
}

impl LanguageModel for TemperatureModel {
    fn vocab(&self) -> &Vocabulary {
        self.base.vocab()
    }

    fn next_dist(&self, context: &[TokenId]) -> CategoricalDistribution {
        let dist = self.base.next_dist(context);
        if self.r == 1.0 {
            return dist;
        }
        CategoricalDistribution::from_log_weights(
            dist.log_probs().iter().map(|&lp| lp / self.r).collect(),
        )
    }
}

pub struct NoiseModel {
    base: NGramModel,
    k: f64,
    seed: u64,
    level_stds: Vec<f64>,
}

pub fn degrade_noise(base: NGramModel, k: f64, seed: u64) -> Result<NoiseModel, DegradeError> {
    if !k.is_finite() || k < 0.0 {
        return Err(DegradeError::BadNoiseScale { k });
    }
    let level_stds = level_parameter_stds(&base);
    Ok(NoiseModel {
        base,
        k,
        seed,
        level_stds,
    })
}

/// Sample standard deviation of the smoothed log-probability entries of
/// each back-off level, streamed with Welford's recurrence.
fn level_parameter_stds(base: &NGramModel) -> Vec<f64> {
    base.levels()
        .iter()
        .map(|table| {
            let mut count = 0u64;
            let mut mean = 0.0;
            let mut m2 = 0.0;
            for cell in table.values() {
                for lp in base.smoothed_row(cell) {
                    if !lp.is_finite() {
                        continue;
                    }
                    count += 1;
                    let delta = lp - mean;
                    mean += delta / count as f64;
                    m2 += delta * (lp - mean);
                }
            }
            if count > 1 {
                (m2 / (count - 1) as f64).sqrt()
            } else {
                0.0
            }
        })
        .collect()
}

impl NoiseModel {
    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn level_stds(&self) -> &[f64] {
        &self.level_stds
    }

    /// The fixed noise value for one table entry, scaled to its level.
    fn noise_at(&self, level: usize, window: &[TokenId], id: usize) -> f64 {
        let mut parts = Vec::with_capacity(window.len() + 3);
        parts.push(self.seed);
        parts.push(level as u64);
        parts.extend(window.iter().map(|&t| u64::from(t)));
        parts.push(id as u64);
        StableRng::new(stable_hash(&parts)).gaussian() * self.level_stds[level]
    }
}

impl LanguageModel for NoiseModel {
    fn vocab(&self) -> &Vocabulary {
        self.base.vocab()
    }

    fn next_dist(&self, context: &[TokenId]) -> CategoricalDistribution {
        let (level, window, cell) = self.base.resolve_context(context);
        let row = self.base.smoothed_row(cell);
        if self.k == 0.0 {
            return CategoricalDistribution::from_normalized_log_probs(row);
        }
        let weights = row
            .iter()
            .enumerate()
            .map(|(id, &lp)| {
                if lp.is_finite() {
                    lp + self.k * self.noise_at(level, &window, id)
                } else {
                    lp
                }
            })
            .collect();
        CategoricalDistribution::from_log_weights(weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::train_ngram;
    use crate::tokenizer::{Token, TokenSequence};

    fn abe_vocab() -> Vocabulary {
        Vocabulary::from_tokens(vec![
            Token::Pad,
            Token::Eos,
            Token::Pitch { pitch: 60 },
            Token::Pitch { pitch: 62 },
        ])
        .unwrap()
    }

    fn small_model() -> NGramModel {
        train_ngram(
            &[TokenSequence(vec![2, 3, 1]), TokenSequence(vec![2, 2, 3, 1])],
            &abe_vocab(),
            2,
            0.1,
        )
        .unwrap()
    }

    fn all_contexts(vocab_len: usize) -> Vec<Vec<TokenId>> {
        let mut contexts = vec![vec![]];
        for a in 0..vocab_len as TokenId {
            contexts.push(vec![a]);
            for b in 0..vocab_len as TokenId {
                contexts.push(vec![a, b]);
            }
        }
        contexts
    }

    #[test]
    fn unit_temperature_is_exactly_the_identity() {
        let base = small_model();
        let degraded = degrade_temperature(base.clone(), 1.0).unwrap();
        for ctx in all_contexts(4) {
            assert_eq!(
                degraded.next_dist(&ctx).log_probs(),
                base.next_dist(&ctx).log_probs()
            );
        }
    }

    #[test]
    fn worked_softmax_example() {
        struct Fixed(Vocabulary);
        impl LanguageModel for Fixed {
            fn vocab(&self) -> &Vocabulary {
                &self.0
            }
            fn next_dist(&self, _: &[TokenId]) -> CategoricalDistribution {
                // Log-weights proportional to logits [2, 0] over two live ids.
                CategoricalDistribution::from_log_weights(vec![
                    f64::NEG_INFINITY,
                    f64::NEG_INFINITY,
                    2.0,
                    0.0,
                ])
            }
        }
        let degraded = degrade_temperature(Fixed(abe_vocab()), 2.0).unwrap();
        let dist = degraded.next_dist(&[]);
        let e = std::f64::consts::E;
        assert!((dist.prob(2) - e / (e + 1.0)).abs() < 1e-12);
        assert!((dist.prob(3) - 1.0 / (e + 1.0)).abs() < 1e-12);
        assert_eq!(dist.prob(0), 0.0);
    }

    #[test]
    fn huge_temperature_flattens_to_uniform() {
        let base = small_model();
        let degraded = degrade_temperature(base, 1e6).unwrap();
        let dist = degraded.next_dist(&[2]);
        for id in dist.support() {
            assert!((dist.prob(id) - 1.0 / 3.0).abs() < 1e-6);
        }
    }

    #[test]
    fn temperature_raises_entropy_and_keeps_order() {
        let base = small_model();
        let cool = base.next_dist(&[2]);
        let warm = degrade_temperature(base, 1.5).unwrap().next_dist(&[2]);
        assert!(warm.entropy() > cool.entropy());
        let order = |d: &CategoricalDistribution| {
            let mut ids: Vec<TokenId> = d.support().collect();
            ids.sort_by(|&a, &b| d.prob(b).partial_cmp(&d.prob(a)).unwrap().then(a.cmp(&b)));
            ids
        };
        assert_eq!(order(&cool), order(&warm));
    }

    #[test]
    fn bad_parameters_are_rejected() {
        assert!(matches!(
            degrade_temperature(small_model(), 0.0),
            Err(DegradeError::BadTemperature { .. })
        ));
        assert!(matches!(
            degrade_temperature(small_model(), -1.0),
            Err(DegradeError::BadTemperature { .. })
        ));
        assert!(matches!(
            degrade_noise(small_model(), -0.1, 1),
            Err(DegradeError::BadNoiseScale { .. })
        ));
    }

    #[test]
    fn zero_noise_is_exactly_the_identity() {
        let base = small_model();
        let degraded = degrade_noise(base.clone(), 0.0, 123).unwrap();
        for ctx in all_contexts(4) {
            assert_eq!(
                degraded.next_dist(&ctx).log_probs(),
                base.next_dist(&ctx).log_probs()
            );
        }
    }

    #[test]
    fn fixed_seed_noise_is_reproducible() {
        let a = degrade_noise(small_model(), 0.175, 9).unwrap();
        let b = degrade_noise(small_model(), 0.175, 9).unwrap();
        for ctx in all_contexts(4) {
            assert_eq!(
                a.next_dist(&ctx).log_probs(),
                b.next_dist(&ctx).log_probs()
            );
        }
    }

    #[test]
    fn different_seeds_give_different_noise() {
        let a = degrade_noise(small_model(), 0.5, 1).unwrap();
        let b = degrade_noise(small_model(), 0.5, 2).unwrap();
        let differs = all_contexts(4)
            .iter()
            .any(|ctx| a.next_dist(ctx).log_probs() != b.next_dist(ctx).log_probs());
        assert!(differs);
    }

    #[test]
    fn noise_perturbs_the_base_model() {
        let base = small_model();
        let degraded = degrade_noise(base.clone(), 0.5, 7).unwrap();
        let differs = all_contexts(4)
            .iter()
            .any(|ctx| degraded.next_dist(ctx).log_probs() != base.next_dist(ctx).log_probs());
        assert!(differs);
        for ctx in all_contexts(4) {
            let dist = degraded.next_dist(&ctx);
            assert!((dist.total_probability() - 1.0).abs() < 1e-9);
            assert_eq!(dist.prob(0), 0.0);
        }
    }

    #[test]
    fn level_stds_match_a_naive_two_pass() {
        let base = small_model();
        let degraded = degrade_noise(base.clone(), 0.1, 5).unwrap();
        for (level, table) in base.parameter_tables().iter().enumerate() {
            let n = table.len() as f64;
            let mean = table.iter().sum::<f64>() / n;
            let var = table.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
            assert!(
                (degraded.level_stds()[level] - var.sqrt()).abs() < 1e-9,
                "level {level}"
            );
        }
    }
}
