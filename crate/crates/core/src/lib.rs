//! Desk-scale toolkit for building accelerator-aware NAS surrogate benchmarks.
//!
//! The pipeline has three stages:
//!
//! 1. [`proxysearch`]: find a cheap training scheme whose accuracies rank
//!    architectures like the expensive reference scheme does, under a
//!    training-time budget.
//! 2. [`data`] and [`surrogate`]: collect `(architecture, metric)` datasets
//!    with that scheme and fit gradient-boosted tree surrogates on them.
//! 3. [`optim`]: run Random Search, Regularized Evolution and REINFORCE
//!    against the surrogates at zero cost, uni- or bi-objective, and extract
//!    Pareto fronts.
//!
//! Real training and on-device measurement are replaced by the deterministic
//! synthetic oracles in `proxysearch::oracle` and `data::device`.

pub mod archspace;
pub mod data;
pub mod metrics;
pub mod optim;
pub mod proxysearch;
pub mod surrogate;

pub use archspace::{Architecture, BlockSpec, SpaceDef};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random source used throughout the crate. ChaCha keeps streams stable
/// across platforms and `rand` releases.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a word sequence, stable across runs and builds.
pub(crate) fn stable_hash(words: impl IntoIterator<Item = u64>) -> u64 {
    words
        .into_iter()
        .fold(0x243F_6A88_85A3_08D3, |h, w| mix64(h ^ mix64(w)))
}

/// Hash of an architecture's decisions.
pub(crate) fn arch_words(arch: &Architecture) -> impl Iterator<Item = u64> + '_ {
    arch.blocks.iter().map(|b| {
        u64::from(b.expansion) << 24
            | u64::from(b.kernel) << 16
            | u64::from(b.layers) << 8
            | b.se as u64
    })
}
