//! Deterministic seed splitting for replicated experiments.
//!
//! Replica `i` of an experiment seeded with `seed` draws from a ChaCha8
//! stream keyed by `split(seed, i)`, where `split` is two rounds of the
//! SplitMix64 finalizer applied to `seed` and the golden-ratio-scaled index.
//! The mapping depends only on `(seed, i)`, so results do not depend on the
//! scheduling of replicas across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of replica `index` from the experiment seed.
pub fn split(seed: u64, index: u64) -> u64 {
    mix(mix(seed.wrapping_add(GOLDEN)) ^ index.wrapping_add(1).wrapping_mul(GOLDEN))
}

/// The generator used by replica `index`.
pub fn replica_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(split(seed, index))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
