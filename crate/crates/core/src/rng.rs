//! Seeded randomness.
//!
//! Edge sampling draws one 64-bit value per unordered pair from a ChaCha
//! stream keyed by `(seed, u)` at word position `2v`, so a pair's coin does
//! not depend on the order in which pairs are visited. Every other random
//! choice uses a ChaCha generator keyed by `(seed, tag)`.

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::Vertex;

pub(crate) const TAG_PLACEMENT: u64 = 0x706c_6163_656d_656e;
pub(crate) const TAG_SAMPLE: u64 = 0x7361_6d70_6c65_0001;
pub(crate) const TAG_DELTA: u64 = 0x7361_6d70_6c65_0002;
pub(crate) const TAG_RANDOM_SET: u64 = 0x7261_6e64_7365_7400;

/// Generator for an independent tagged stream.
pub fn tagged_rng(seed: u64, tag: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&tag.to_le_bytes());
    key[16..24].copy_from_slice(b"sbm-mpc\0");
    ChaCha8Rng::from_seed(key)
}

/// Counter-based coins for the pairs `(u, v)` with `v > u`.
pub struct PairCoins {
    rng: ChaCha8Rng,
}

impl PairCoins {
    /// Positions the stream for row `u`, starting at column `first`.
    pub fn row(seed: u64, u: Vertex, first: Vertex) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u as u64);
        rng.set_word_pos(2 * first as u128);
        PairCoins { rng }
    }

    /// Uniform value in [0, 1) for the next column.
    pub fn next_unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Uniform subset of `[0, population)` with exactly `size` members, sorted.
pub fn sample_exact(seed: u64, tag: u64, population: usize, size: usize) -> Vec<Vertex> {
    let size = size.min(population);
    let mut rng = tagged_rng(seed, tag);
    let mut picked: Vec<Vertex> = index::sample(&mut rng, population, size)
        .into_iter()
        .map(|v| v as Vertex)
        .collect();
    picked.sort_unstable();
    picked
}

/// Independent Bernoulli selection of every vertex with probability `prob`.
pub fn sample_bernoulli(seed: u64, tag: u64, population: usize, prob: f64) -> Vec<Vertex> {
    let mut rng = tagged_rng(seed, tag);
    (0..population as Vertex)
        .filter(|_| rng.random::<f64>() < prob)
        .collect()
}
