//! Seed derivation for reproducible experiments.
//!
//! A root seed spawns independent substreams through the ChaCha stream
//! counter, so adding repetitions never perturbs the streams of earlier
//! ones.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate.
pub type Rng = ChaCha8Rng;

/// Root generator for a seed.
pub fn root(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent substream `index` of `seed`.
///
/// Substreams share the ChaCha key derived from the seed and differ only
/// in the stream counter, so `substream(s, i)` is stable no matter how
/// many other substreams are drawn.
pub fn substream(seed: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
