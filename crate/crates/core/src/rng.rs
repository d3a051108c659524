//! Deterministic randomness for every seeded operation in the crate.
//!
//! All sampling, shuffling, noise and seed derivation goes through
//! [`StableRng`] and [`stable_hash`]. The generator wraps ChaCha8, whose raw
//! output stream is a fixed cipher, and implements its own uniform, choice
//! and gaussian arithmetic on top, so results do not depend on distribution
//! algorithms of the `rand` crate that may change between releases. Equal
//! seeds give equal streams on any platform.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix an ordered list of integers into one 64-bit value. Used to derive
/// sub-seeds (per cell, per stream, per table row) from a master seed so
/// that no two derivation paths collide by construction of their parts.
pub fn stable_hash(parts: &[u64]) -> u64 {
    let mut h = 0x9E37_79B9_7F4A_7C15;
    for &part in parts {
        h = splitmix64(h ^ part);
    }
    h
}

/// Hash a label (strategy or degradation tag) into a seed part. Bytes are
/// folded in little-endian 8-byte chunks with the length mixed in, so
/// "ab" + "c" and "a" + "bc" land apart.
pub fn stable_hash_str(text: &str) -> u64 {
    let bytes = text.as_bytes();
    let mut parts: Vec<u64> = Vec::with_capacity(bytes.len() / 8 + 2);
    parts.push(bytes.len() as u64);
    for chunk in bytes.chunks(8) {
        let mut word = [0u8; 8];
        word[..chunk.len()].copy_from_slice(chunk);
        parts.push(u64::from_le_bytes(word));
    }
    stable_hash(&parts)
}

/// Deterministic random generator with a fixed cross-version stream.
#[derive(Debug, Clone)]
pub struct StableRng {
    inner: ChaCha8Rng,
}

impl StableRng {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        let mut word = seed;
        for chunk in key.chunks_exact_mut(8) {
            word = splitmix64(word);
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        StableRng {
            inner: ChaCha8Rng::from_seed(key),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n). Uses the widening-multiply map, which is
    /// deterministic and consumes exactly one stream value.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0) is meaningless");
        (((self.next_u64() as u128) * (n as u128)) >> 64) as u64
    }

    /// Fisher-Yates shuffle driven by [`Self::below`].
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }

    /// Standard normal draw via the Box-Muller transform. Consumes two
    /// stream values.
    pub fn gaussian(&mut self) -> f64 {
        let u = self.uniform();
        let v = self.uniform();
        (-2.0 * (1.0 - u).ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    }
}
