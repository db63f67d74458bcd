//! Deterministic seeding.
//!
//! All randomness in this crate flows through [`ChaCha8Rng`], a portable
//! counter-based stream cipher generator, so that any artifact (dataset,
//! parameter trajectory, mask sequence) is reproducible from its seed alone.
//!
//! Independent streams are derived from a base seed with a splitmix64 hash of
//! `(seed, purpose, index)`. A purpose constant separates the roles a single
//! user-facing seed plays (parameter init, per-step masks, per-record noise,
//! ...); the index separates records, steps, or epochs within a role.

use rand_chacha::rand_core::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

pub const PURPOSE_PARAM_INIT: u64 = 1;
pub const PURPOSE_STEP_MASK: u64 = 2;
pub const PURPOSE_VAL_MASK: u64 = 3;
pub const PURPOSE_RECORD: u64 = 4;
pub const PURPOSE_GRAPH: u64 = 5;
pub const PURPOSE_EPOCH_SHUFFLE: u64 = 6;
pub const PURPOSE_MASK: u64 = 7;
pub const PURPOSE_NOISE: u64 = 8;
pub const PURPOSE_BASE_FLOW: u64 = 9;
pub const PURPOSE_TRAIN_DATA: u64 = 10;
pub const PURPOSE_TEST_DATA: u64 = 11;

/// splitmix64 finalizer; a well-mixed 64-bit permutation.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `(seed, purpose, index)` into a single stream seed.
pub fn mix(seed: u64, purpose: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(purpose)) ^ index)
}

/// A generator for one `(seed, purpose, index)` stream.
pub fn derive_rng(seed: u64, purpose: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, purpose, index))
}
