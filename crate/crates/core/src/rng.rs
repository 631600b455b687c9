//! Seed derivation and counter-based randomness.
//!
//! Every random quantity in the crate is a function of a user seed and an
//! integer counter (replica index, path index, time index). Nothing depends
//! on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replica `k`: `seed ^ splitmix(k)`.
#[inline]
pub fn derive_seed(seed: u64, k: u64) -> u64 {
    seed ^ splitmix64(k)
}

/// Two-level derivation, used for (stream, index) pairs.
#[inline]
pub fn derive_seed2(seed: u64, stream: u64, k: u64) -> u64 {
    derive_seed(derive_seed(seed, stream), k)
}

/// Uniform in [0, 1) from a 64-bit word, 53 random mantissa bits.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Counter-based uniform draw: a pure function of (seed, counter).
#[inline]
pub fn counter_uniform(seed: u64, counter: i64) -> f64 {
    unit_f64(splitmix64(splitmix64(seed) ^ (counter as u64)))
}

/// ChaCha stream for replica `k` of a run seeded with `seed`.
pub fn replica_rng(seed: u64, k: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, k))
}
