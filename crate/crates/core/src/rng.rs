//! Seeded random streams.
//!
//! Every random draw in the pipeline comes from a [`ChaCha8Rng`] whose seed
//! is derived from the run seed plus a path of integer tags (restart index,
//! cluster index, fold, ...). Work units therefore own independent streams
//! and results do not depend on how the work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Combines a seed with a tag into a new, well-mixed seed.
pub fn mix(seed: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Derives a seed from `seed` and a path of tags.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(seed, |s, &t| mix(s, t))
}

pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive(seed, path))
}

// Domain tags keep streams for different pipeline stages apart.
pub(crate) const TAG_KMEANS: u64 = 1;
pub(crate) const TAG_SAMPLE: u64 = 2;
pub(crate) const TAG_FOLDS: u64 = 3;
pub(crate) const TAG_FOLD_FIT: u64 = 4;
