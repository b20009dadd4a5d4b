//! Seed derivation and per-purpose random streams.
//!
//! Every stochastic component draws from its own ChaCha stream keyed by a
//! derived 64-bit seed, so adding draws in one component never perturbs
//! another and sessions stay reproducible bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type Stream = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finaliser.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed and a path of labels.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(base.wrapping_add(GOLDEN)), |acc, &p| {
        mix64(acc ^ mix64(p.wrapping_add(GOLDEN)))
    })
}

pub fn stream(base: u64, path: &[u64]) -> Stream {
    Stream::seed_from_u64(derive_seed(base, path))
}

/// Stream labels, kept in one place so no two purposes collide.
pub mod label {
    pub const CHANNEL: u64 = 1;
    pub const OUTCOME: u64 = 2;
    pub const UPLINK: u64 = 3;
    pub const RETRY: u64 = 4;
    pub const CANDIDATE: u64 = 5;
    pub const BASELINE: u64 = 6;
    pub const POPULATION: u64 = 7;
    pub const INIT: u64 = 8;
    pub const EVALUATION: u64 = 9;
}
