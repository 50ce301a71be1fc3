//! Deterministic seed derivation.
//!
//! Every random decision in the crate draws from a [`rand_chacha::ChaCha8Rng`]
//! seeded through [`subseed`], so a run is a pure function of the master seed.
//! Independent consumers (scene generation, parameter init, per-block point
//! sampling, ...) get their own stream constant to keep their draws decoupled:
//! inserting a draw in one consumer never shifts another consumer's sequence.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream constants for [`subseed`]. Values are arbitrary but fixed forever;
/// changing one changes every artifact derived from it.
pub mod streams {
    /// Synthetic scene generation.
    pub const SCENE: u64 = 0x5ce9e;
    /// Model parameter initialization.
    pub const INIT: u64 = 0x1217;
    /// Per-epoch block shuffling.
    pub const SHUFFLE: u64 = 0x5481f;
    /// Per-block point sampling.
    pub const SAMPLE: u64 = 0x5a3;
}

/// SplitMix64 step: the standard 64-bit finalizer used to spread seed bits.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `(base, stream, index)`.
///
/// The triple is mixed through three SplitMix64 steps, so nearby inputs
/// (consecutive indices, small stream ids) give unrelated outputs.
pub fn subseed(base: u64, stream: u64, index: u64) -> u64 {
    let mut state = base;
    let a = splitmix64(&mut state);
    let mut state = a ^ stream;
    let b = splitmix64(&mut state);
    let mut state = b ^ index;
    splitmix64(&mut state)
}

/// ChaCha8 generator for a derived seed.
pub fn rng_for(base: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(subseed(base, stream, index))
}
