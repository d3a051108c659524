//! Truncation sampling strategies and the autoregressive generation loop.
//!
//! Every strategy maps a conditional distribution to a new one by zeroing
//! some tokens and renormalizing the survivors, which preserves their
//! relative probabilities. Prefix selection breaks ties by ascending token
//! id, and cumulative-mass comparisons allow a tiny tolerance so that an
//! exact prefix (for example mass 0.8 against tau = 0.8) is kept even when
//! float summation lands a few ulps short.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::dist::CategoricalDistribution;
use crate::lm::LanguageModel;
use crate::rng::StableRng;
use crate::score::Score;
use crate::tokenizer::{encoded_len, TokenId, TokenSequence};

/// Slack for cumulative-probability comparisons against tau.
pub const CUMULATIVE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplingStrategy {
    Conventional,
    Nucleus { tau: f64 },
    Typical { tau: f64 },
    TopK { k: usize },
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum StrategyError {
    #[error("tau must be in (0, 1], got {tau}")]
    BadTau { tau: f64 },
    #[error("k must be at least 1")]
    BadK,
    #[error("unknown strategy descriptor {descriptor:?}")]
    BadDescriptor { descriptor: String },
}

impl SamplingStrategy {
    pub fn nucleus(tau: f64) -> Result<Self, StrategyError> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(StrategyError::BadTau { tau });
        }
        Ok(SamplingStrategy::Nucleus { tau })
    }

    pub fn typical(tau: f64) -> Result<Self, StrategyError> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(StrategyError::BadTau { tau });
        }
        Ok(SamplingStrategy::Typical { tau })
    }

    pub fn top_k(k: usize) -> Result<Self, StrategyError> {
        if k == 0 {
            return Err(StrategyError::BadK);
        }
        Ok(SamplingStrategy::TopK { k })
    }

    /// The strategy family without parameters, as used in result tables.
    pub fn family(&self) -> &'static str {
        match self {
            SamplingStrategy::Conventional => "conventional",
            SamplingStrategy::Nucleus { .. } => "nucleus",
            SamplingStrategy::Typical { .. } => "typical",
            SamplingStrategy::TopK { .. } => "topk",
        }
    }

    pub fn tau(&self) -> Option<f64> {
        match self {
            SamplingStrategy::Nucleus { tau } | SamplingStrategy::Typical { tau } => Some(*tau),
            _ => None,
        }
    }

    /// Apply the strategy's truncation. When the kept set covers the whole
    /// support the input is reproduced exactly.
    pub fn truncate(&self, dist: &CategoricalDistribution) -> CategoricalDistribution {
        match *self {
            SamplingStrategy::Conventional => dist.clone(),
            SamplingStrategy::Nucleus { tau } => {
                let mut entries = support_probs(dist);
                entries.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
                keep_mass_prefix(dist, &entries, tau)
            }
            SamplingStrategy::Typical { tau } => {
                let entropy = dist.entropy();
                let mut entries = support_probs(dist);
                entries.sort_by(|a, b| {
                    let da = (entropy - dist.information_content(a.0)).abs();
                    let db = (entropy - dist.information_content(b.0)).abs();
                    da.partial_cmp(&db).unwrap().then(a.0.cmp(&b.0))
                });
                keep_mass_prefix(dist, &entries, tau)
            }
            SamplingStrategy::TopK { k } => {
                let mut entries = support_probs(dist);
                entries.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
                if k >= entries.len() {
                    return dist.clone();
                }
                let kept: Vec<TokenId> = entries[..k].iter().map(|e| e.0).collect();
                dist.renormalized_subset(&kept)
            }
        }
    }
}

fn support_probs(dist: &CategoricalDistribution) -> Vec<(TokenId, f64)> {
    dist.support().map(|id| (id, dist.prob(id))).collect()
}

/// Keep the shortest prefix of `entries` whose probability mass reaches
/// tau, never fewer than one element.
fn keep_mass_prefix(
    dist: &CategoricalDistribution,
    entries: &[(TokenId, f64)],
    tau: f64,
) -> CategoricalDistribution {
    let mut cumulative = 0.0;
    let mut kept = Vec::new();
    for &(id, p) in entries {
        kept.push(id);
        cumulative += p;
        if cumulative >= tau - CUMULATIVE_TOLERANCE {
            break;
        }
    }
    if kept.len() == entries.len() {
        return dist.clone();
    }
    dist.renormalized_subset(&kept)
}

impl fmt::Display for SamplingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplingStrategy::Conventional => write!(f, "conventional"),
            SamplingStrategy::Nucleus { tau } => write!(f, "nucleus:{tau}"),
            SamplingStrategy::Typical { tau } => write!(f, "typical:{tau}"),
            SamplingStrategy::TopK { k } => write!(f, "topk:{k}"),
        }
    }
}

impl FromStr for SamplingStrategy {
    type Err = StrategyError;

    fn from_str(descriptor: &str) -> Result<Self, StrategyError> {
        let bad = || StrategyError::BadDescriptor {
            descriptor: descriptor.to_string(),
        };
        match descriptor.split_once(':') {
            None if descriptor == "conventional" => Ok(SamplingStrategy::Conventional),
            Some(("nucleus", tau)) => {
                SamplingStrategy::nucleus(tau.parse().map_err(|_| bad())?)
            }
            Some(("typical", tau)) => {
                SamplingStrategy::typical(tau.parse().map_err(|_| bad())?)
            }
            Some(("topk", k)) => SamplingStrategy::top_k(k.parse().map_err(|_| bad())?),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    pub max_len: usize,
    pub eos_id: TokenId,
    pub seed: u64,
    pub strategy: SamplingStrategy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    EosTerminated,
    LengthCapped,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationOutcome {
    pub stop: StopReason,
    pub len: usize,
}

/// Sample one sequence: query the model, truncate, draw, repeat until EOS
/// is emitted or `max_len` tokens exist. Both stopping conditions keep the
/// produced sequence. Output is a pure function of (model, config).
pub fn generate(
    model: &dyn LanguageModel,
    config: &GenerationConfig,
) -> (TokenSequence, GenerationOutcome) {
    assert!(config.max_len >= 1, "max_len must be at least 1");
    let mut rng = StableRng::new(config.seed);
    let mut ids: Vec<TokenId> = Vec::new();
    let mut stop = StopReason::LengthCapped;
    while ids.len() < config.max_len {
        let dist = model.next_dist(&ids);
        let truncated = config.strategy.truncate(&dist);
        let id = truncated.sample(&mut rng);
        ids.push(id);
        if id == config.eos_id {
            stop = StopReason::EosTerminated;
            break;
        }
    }
    let len = ids.len();
    (TokenSequence(ids), GenerationOutcome { stop, len })
}

/// 80th percentile (nearest-rank) of tokenized score lengths.
pub fn default_max_len(training_scores: &[Score]) -> usize {
    assert!(!training_scores.is_empty(), "no training scores");
    let mut lengths: Vec<usize> = training_scores.iter().map(encoded_len).collect();
    lengths.sort_unstable();
    let rank = (8 * lengths.len()).div_ceil(10);
    lengths[rank - 1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::CategoricalDistribution;
    use crate::score::{Bar, Note, TimeSignature};
    use crate::tokenizer::{Token, Vocabulary};

    fn probs(values: &[f64]) -> CategoricalDistribution {
        CategoricalDistribution::from_probs(values)
    }

    fn assert_close(dist: &CategoricalDistribution, want: &[f64]) {
        for (id, &w) in want.iter().enumerate() {
            let got = dist.prob(id as TokenId);
            assert!((got - w).abs() < 1e-12, "id {id}: got {got}, want {w}");
        }
    }

    #[test]
    fn nucleus_worked_example() {
        let d = probs(&[0.5, 0.3, 0.15, 0.05]);
        let t = SamplingStrategy::nucleus(0.8).unwrap().truncate(&d);
        assert_close(&t, &[0.625, 0.375, 0.0, 0.0]);
    }

    #[test]
    fn nucleus_full_tau_is_exactly_the_identity() {
        let d = probs(&[0.5, 0.3, 0.15, 0.05]);
        let t = SamplingStrategy::nucleus(1.0).unwrap().truncate(&d);
        assert_eq!(t.log_probs(), d.log_probs());
    }

    #[test]
    fn nucleus_uniform_ties_break_by_id() {
        let d = probs(&[0.25; 4]);
        let t = SamplingStrategy::nucleus(0.5).unwrap().truncate(&d);
        assert_close(&t, &[0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn typical_worked_example_keeps_near_entropy_tokens() {
        // H = 1.75 bits = 1.21301 nats; |H - IC| orders t1 < t0 < t2 = t3.
        let d = probs(&[0.5, 0.25, 0.125, 0.125]);
        let t = SamplingStrategy::typical(0.6).unwrap().truncate(&d);
        assert_close(&t, &[2.0 / 3.0, 1.0 / 3.0, 0.0, 0.0]);
    }

    #[test]
    fn typical_can_zero_the_argmax() {
        let d = probs(&[0.5, 0.25, 0.125, 0.125]);
        let t = SamplingStrategy::typical(0.25).unwrap().truncate(&d);
        assert_close(&t, &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(d.argmax(), 0);
        assert_eq!(t.prob(0), 0.0);
    }

    #[test]
    fn typical_uniform_prefix_by_id() {
        let d = probs(&[0.25; 4]);
        let t = SamplingStrategy::typical(0.5).unwrap().truncate(&d);
        assert_close(&t, &[0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn top_k_examples() {
        let d = probs(&[0.5, 0.3, 0.15, 0.05]);
        let two = SamplingStrategy::top_k(2).unwrap().truncate(&d);
        assert_close(&two, &[0.625, 0.375, 0.0, 0.0]);
        let all = SamplingStrategy::top_k(4).unwrap().truncate(&d);
        assert_eq!(all.log_probs(), d.log_probs());
        let one = SamplingStrategy::top_k(1).unwrap().truncate(&d);
        assert_close(&one, &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn exact_prefix_mass_is_kept_despite_float_slop() {
        // 0.5 + 0.3 lands just under 0.8 in binary; the tolerance keeps the
        // two-token prefix instead of spilling into a third.
        let d = probs(&[0.5, 0.3, 0.15, 0.05]);
        let t = SamplingStrategy::nucleus(0.8).unwrap().truncate(&d);
        assert_eq!(t.support_size(), 2);
    }

    #[test]
    fn descriptors_round_trip() {
        for text in ["conventional", "nucleus:0.8", "typical:0.95", "topk:32"] {
            let strategy: SamplingStrategy = text.parse().unwrap();
            assert_eq!(strategy.to_string(), text);
        }
        for bad in ["nucleus", "nucleus:0", "nucleus:1.5", "topk:0", "beam:3", "conventional:1"] {
            assert!(bad.parse::<SamplingStrategy>().is_err(), "{bad}");
        }
    }

    #[test]
    fn chi_square_fit_of_seeded_draws() {
        // Conventional draws from a 4-outcome distribution; df = 3 and the
        // 0.999 quantile of chi-square with 3 degrees of freedom is 16.2662.
        let d = probs(&[0.5, 0.25, 0.125, 0.125]);
        let mut rng = StableRng::new(2024);
        let n = 100_000;
        let mut observed = [0u64; 4];
        for _ in 0..n {
            observed[d.sample(&mut rng) as usize] += 1;
        }
        let chi2: f64 = observed
            .iter()
            .enumerate()
            .map(|(id, &o)| {
                let e = d.prob(id as TokenId) * n as f64;
                (o as f64 - e) * (o as f64 - e) / e
            })
            .sum();
        assert!(chi2 < 16.2662, "chi2 = {chi2}");
    }

    struct Scripted {
        vocab: Vocabulary,
        dist: Vec<f64>,
    }

    impl Scripted {
        fn new(dist: Vec<f64>) -> Self {
            Scripted {
                vocab: Vocabulary::from_tokens(vec![
                    Token::Pad,
                    Token::Eos,
                    Token::Pitch { pitch: 60 },
                    Token::Pitch { pitch: 62 },
                ])
                .unwrap(),
                dist,
            }
        }
    }

    impl LanguageModel for Scripted {
        fn vocab(&self) -> &Vocabulary {
            &self.vocab
        }
        fn next_dist(&self, _: &[TokenId]) -> CategoricalDistribution {
            CategoricalDistribution::from_probs(&self.dist)
        }
    }

    #[test]
    fn generation_stops_at_eos() {
        let model = Scripted::new(vec![0.0, 1.0, 0.0, 0.0]);
        let config = GenerationConfig {
            max_len: 100,
            eos_id: 1,
            seed: 5,
            strategy: SamplingStrategy::Conventional,
        };
        let (seq, outcome) = generate(&model, &config);
        assert_eq!(seq.ids(), &[1]);
        assert_eq!(outcome.stop, StopReason::EosTerminated);
        assert_eq!(outcome.len, 1);
    }

    #[test]
    fn generation_caps_at_max_len() {
        let model = Scripted::new(vec![0.0, 0.0, 0.6, 0.4]);
        let config = GenerationConfig {
            max_len: 17,
            eos_id: 1,
            seed: 5,
            strategy: SamplingStrategy::Conventional,
        };
        let (seq, outcome) = generate(&model, &config);
        assert_eq!(seq.len(), 17);
        assert_eq!(outcome.stop, StopReason::LengthCapped);
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let model = Scripted::new(vec![0.0, 0.05, 0.6, 0.35]);
        let config = GenerationConfig {
            max_len: 50,
            eos_id: 1,
            seed: 99,
            strategy: SamplingStrategy::Nucleus { tau: 0.9 },
        };
        assert_eq!(generate(&model, &config), generate(&model, &config));
        let other = GenerationConfig { seed: 100, ..config.clone() };
        assert_ne!(generate(&model, &config).0, generate(&model, &other).0);
    }

    #[test]
    fn default_max_len_nearest_rank() {
        let score_of_notes = |n: usize| {
            let notes = (0..n).map(|i| Note::new(60, i as u32, 1)).collect();
            Score::new("s", vec![Bar::new(TimeSignature::new(4, 4), notes)])
        };
        // encoded_len = 3 + 3 * notes: choose note counts so the token
        // lengths are ten values [10 x 8, 100, 200] scaled into reach.
        // Simpler: lengths directly via bars of 1..n notes.
        let mut scores: Vec<Score> = (0..8).map(|_| score_of_notes(2)).collect();
        scores.push(score_of_notes(10));
        scores.push(score_of_notes(20));
        // lengths: eight of 9, one 33, one 63 -> 80th percentile is 9.
        assert_eq!(default_max_len(&scores), 9);
        let equal: Vec<Score> = (0..5).map(|_| score_of_notes(4)).collect();
        assert_eq!(default_max_len(&equal), 15);
        assert_eq!(default_max_len(&[score_of_notes(1)]), 6);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_dist() -> impl Strategy<Value = CategoricalDistribution> {
            proptest::collection::vec(0.0f64..10.0, 2..64).prop_filter_map(
                "needs positive mass",
                |weights| {
                    if weights.iter().any(|&w| w > 0.0) {
                        Some(CategoricalDistribution::from_probs(&weights))
                    } else {
                        None
                    }
                },
            )
        }

        fn check_common(dist: &CategoricalDistribution, out: &CategoricalDistribution) {
            assert!((out.total_probability() - 1.0).abs() < 1e-9);
            for id in out.support() {
                assert!(dist.prob(id) > 0.0, "support grew at id {id}");
            }
            let mass: f64 = out.support().map(|id| dist.prob(id)).sum();
            for id in out.support() {
                let expected = dist.prob(id) / mass;
                assert!(
                    (out.prob(id) - expected).abs() < 1e-9,
                    "id {id} not proportional"
                );
            }
        }

        proptest! {
            #[test]
            fn nucleus_prefix_is_minimal(dist in arb_dist(), tau in 0.01f64..=1.0) {
                let out = SamplingStrategy::nucleus(tau).unwrap().truncate(&dist);
                check_common(&dist, &out);
                let kept_mass: f64 = out.support().map(|id| dist.prob(id)).sum();
                prop_assert!(kept_mass >= tau - 1e-9 || out.support_size() == dist.support_size());
                // Dropping the least probable survivor must fall short of tau.
                if out.support_size() > 1 {
                    let min_kept = out
                        .support()
                        .map(|id| dist.prob(id))
                        .fold(f64::INFINITY, f64::min);
                    prop_assert!(kept_mass - min_kept < tau - CUMULATIVE_TOLERANCE + 1e-9);
                }
            }

            #[test]
            fn typical_prefix_is_minimal(dist in arb_dist(), tau in 0.01f64..=1.0) {
                let out = SamplingStrategy::typical(tau).unwrap().truncate(&dist);
                check_common(&dist, &out);
                if out.support_size() < dist.support_size() {
                    // The survivor furthest from the entropy is the last kept;
                    // removing it must fall short of tau.
                    let entropy = dist.entropy();
                    let last = out
                        .support()
                        .max_by(|&a, &b| {
                            let da = (entropy - dist.information_content(a)).abs();
                            let db = (entropy - dist.information_content(b)).abs();
                            da.partial_cmp(&db).unwrap().then(a.cmp(&b))
                        })
                        .unwrap();
                    let kept_mass: f64 = out.support().map(|id| dist.prob(id)).sum();
                    prop_assert!(
                        kept_mass - dist.prob(last) < tau - CUMULATIVE_TOLERANCE + 1e-9
                    );
                }
            }

            #[test]
            fn full_tau_and_full_k_are_identities(dist in arb_dist()) {
                let n = dist.support_size();
                let nucleus = SamplingStrategy::nucleus(1.0).unwrap().truncate(&dist);
                prop_assert_eq!(nucleus.log_probs(), dist.log_probs());
                let typical = SamplingStrategy::typical(1.0).unwrap().truncate(&dist);
                prop_assert_eq!(typical.log_probs(), dist.log_probs());
                let topk = SamplingStrategy::top_k(n).unwrap().truncate(&dist);
                prop_assert_eq!(topk.log_probs(), dist.log_probs());
            }

            #[test]
            fn nucleus_sets_grow_with_tau(dist in arb_dist(), t1 in 0.01f64..=1.0, t2 in 0.01f64..=1.0) {
                let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
                let small = SamplingStrategy::nucleus(lo).unwrap().truncate(&dist);
                let large = SamplingStrategy::nucleus(hi).unwrap().truncate(&dist);
                for id in small.support() {
                    prop_assert!(large.prob(id) > 0.0, "id {} lost at larger tau", id);
                }
            }
        }
    }
}
