//! Seed derivation and the crate's pseudo-random generator.
//!
//! Every stochastic operation in this crate draws from an explicitly seeded
//! [`ChaCha8Rng`] (portable: the stream for a given seed is identical across
//! platforms and releases of `rand_chacha`). Sub-streams (per fold, per user,
//! per test interaction, ...) are derived with [`mix`], a splitmix64 chain,
//! so they never depend on hasher state or iteration order.

use rand_chacha::rand_core::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; a fixed, well-mixed 64-bit permutation.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fold a list of parts into one sub-stream seed.
pub fn mix(parts: &[u64]) -> u64 {
    parts.iter().fold(0x51_7c_c1_b7_27_22_0a_95, |acc, &p| {
        splitmix64(acc ^ p)
    })
}

/// Stable 64-bit hash of a string (FNV-1a), for keying sub-streams by
/// external identifiers such as user keys.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A generator positioned at the start of the stream for `seed`.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream tags keeping independent purposes on independent sub-streams.
pub mod tags {
    pub const TRAIN_SAMPLER: u64 = 1;
    pub const KFOLD: u64 = 2;
    pub const FM_MAP_NEGATIVES: u64 = 3;
    pub const CROSS_DOMAIN_SELECT: u64 = 4;
    pub const EVAL_CANDIDATES: u64 = 5;
    pub const POINTWISE_SHUFFLE: u64 = 6;
    pub const SYNTH: u64 = 7;
    pub const FOLD_TRAIN: u64 = 8;
}
