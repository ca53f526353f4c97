//! Deterministic random-number plumbing.
//!
//! Every stochastic step in the pipeline (message bits, channel noise, fading
//! phases, interleaver permutations, weight initialization, dropout masks,
//! epoch shuffles) draws from a ChaCha8 stream seeded through the helpers
//! here, so a run is reproducible bit-for-bit from one master seed.
//!
//! The per-stream derivation is part of the on-disk contract: dataset records
//! store the derived frame seed, and regenerating a record from that seed must
//! reproduce the identical tensor.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Derives an independent stream seed from a master seed.
///
/// Uses the SplitMix64 finalizer over `master + GOLDEN * (stream + 1)`, which
/// decorrelates consecutive stream indices while staying trivially portable.
/// This mapping is frozen: changing it would change every generated dataset.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut z = master.wrapping_add(GOLDEN.wrapping_mul(stream.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A seeded ChaCha8 generator, the only RNG used in the crate.
pub fn chacha(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Extension methods for deterministic floating-point draws.
///
/// `rand`'s distribution types are avoided on purpose: the exact draw
/// algorithms below are spelled out here so that generated data cannot shift
/// underneath us when a dependency changes its sampling internals.
pub trait DrawExt {
    /// Uniform draw in `[0, 1)` with 53-bit resolution.
    fn uniform(&mut self) -> f64;

    /// Uniform draw in `(0, 1]` (never zero, safe under `ln`).
    fn uniform_open(&mut self) -> f64;

    /// Standard normal draw via Box-Muller.
    ///
    /// Consumes exactly two uniforms per call and discards the paired
    /// variate, trading a little waste for call-position independence.
    fn gaussian(&mut self) -> f64;

    /// Uniform draw in `0..bound` for index selection.
    fn index(&mut self, bound: usize) -> usize;
}

impl<R: RngCore> DrawExt for R {
    fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn gaussian(&mut self) -> f64 {
        let u1 = self.uniform_open();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    fn index(&mut self, bound: usize) -> usize {
        assert!(bound > 0, "index bound must be positive");
        // Multiply-shift range reduction; bias is < 2^-64 per draw.
        ((self.next_u64() as u128 * bound as u128) >> 64) as usize
    }
}

/// Fisher-Yates shuffle driven by the crate RNG.
pub fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.index(i + 1);
        items.swap(i, j);
    }
}

/// A seeded random permutation of `0..len`.
pub fn permutation(len: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    let mut rng = chacha(seed);
    shuffle(&mut idx, &mut rng);
    idx
}

// ---------------------------------------------------------------------------
