//! Categorical distributions over token ids, stored as natural-log
//! probabilities. Zeroed tokens carry -inf. All entropy and information
//! values in the crate are in nats.

use crate::rng::StableRng;
use crate::tokenizer::TokenId;

#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalDistribution {
    log_probs: Vec<f64>,
}

impl CategoricalDistribution {
    /// Normalize arbitrary log-weights with log-sum-exp. At least one entry
    /// must be finite.
    pub fn from_log_weights(log_weights: Vec<f64>) -> Self {
        let max = log_weights
            .iter()
            .copied()
            .filter(|w| w.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            max.is_finite(),
            "distribution needs at least one finite log-weight"
        );
        let log_total = max
            + log_weights
                .iter()
                .filter(|w| w.is_finite())
                .map(|&w| (w - max).exp())
                .sum::<f64>()
                .ln();
        let log_probs = log_weights
            .into_iter()
            .map(|w| if w.is_finite() { w - log_total } else { f64::NEG_INFINITY })
            .collect();
        CategoricalDistribution { log_probs }
    }

    pub fn from_probs(probs: &[f64]) -> Self {
        Self::from_log_weights(
            probs
                .iter()
                .map(|&p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
                .collect(),
        )
    }

    /// Wrap log-probabilities that are already normalized, skipping the
    /// renormalization so exact-identity contracts can hold bitwise.
    pub(crate) fn from_normalized_log_probs(log_probs: Vec<f64>) -> Self {
        debug_assert!({
            let total: f64 = log_probs
                .iter()
                .filter(|lp| lp.is_finite())
                .map(|lp| lp.exp())
                .sum();
            (total - 1.0).abs() < 1e-9
        });
        CategoricalDistribution { log_probs }
    }

    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    pub fn log_prob(&self, id: TokenId) -> f64 {
        self.log_probs[id as usize]
    }

    pub fn prob(&self, id: TokenId) -> f64 {
        let lp = self.log_probs[id as usize];
        if lp.is_finite() {
            lp.exp()
        } else {
            0.0
        }
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn probs(&self) -> Vec<f64> {
        (0..self.len() as TokenId).map(|id| self.prob(id)).collect()
    }

    /// Ids with non-zero probability, ascending.
    pub fn support(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.log_probs
            .iter()
            .enumerate()
            .filter(|(_, lp)| lp.is_finite())
            .map(|(id, _)| id as TokenId)
    }

    pub fn support_size(&self) -> usize {
        self.log_probs.iter().filter(|lp| lp.is_finite()).count()
    }

    pub fn total_probability(&self) -> f64 {
        self.support().map(|id| self.prob(id)).sum()
    }

    /// -ln q(id); +inf for zeroed tokens.
    pub fn information_content(&self, id: TokenId) -> f64 {
        -self.log_probs[id as usize]
    }

    /// H = -sum p ln p over the support, in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .log_probs
            .iter()
            .filter(|lp| lp.is_finite())
            .map(|&lp| lp.exp() * lp)
            .sum::<f64>()
    }

    /// Highest-probability id, ties to the lowest id.
    pub fn argmax(&self) -> TokenId {
        let mut best = 0;
        let mut best_lp = f64::NEG_INFINITY;
        for (id, &lp) in self.log_probs.iter().enumerate() {
            if lp > best_lp {
                best_lp = lp;
                best = id;
            }
        }
        best as TokenId
    }

    /// Inverse-CDF draw over ascending token ids.
    pub fn sample(&self, rng: &mut StableRng) -> TokenId {
        let u = rng.uniform();
        let mut cumulative = 0.0;
        let mut last_support = None;
        for (id, &lp) in self.log_probs.iter().enumerate() {
            if !lp.is_finite() {
                continue;
            }
            cumulative += lp.exp();
            last_support = Some(id as TokenId);
            if u < cumulative {
                return id as TokenId;
            }
        }
        // Float slop can leave the final cumulative a hair under 1.
        last_support.expect("distribution has non-empty support")
    }

    /// Zero everything outside `keep` and renormalize the survivors by
    /// their total mass, preserving relative probabilities. `keep` must be
    /// a non-empty subset of the support.
    pub(crate) fn renormalized_subset(&self, keep: &[TokenId]) -> CategoricalDistribution {
        let mut kept = keep.to_vec();
        kept.sort_unstable();
        let mass: f64 = kept.iter().map(|&id| self.prob(id)).sum();
        debug_assert!(mass > 0.0);
        let log_mass = mass.ln();
        let mut log_probs = vec![f64::NEG_INFINITY; self.len()];
        for &id in &kept {
            log_probs[id as usize] = self.log_probs[id as usize] - log_mass;
        }
        CategoricalDistribution::from_normalized_log_probs(log_probs)
    }
}
