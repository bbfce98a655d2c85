//! Seed stream derivation.
//!
//! Every random stream in the pipeline is a ChaCha8 generator seeded from a
//! single top-level seed combined with a stage label (and optionally an
//! index). The label is hashed with FNV-1a, xored into the parent seed, and
//! the result mixed with one SplitMix64 round. Work partitioned by index gets
//! the same stream no matter which order it runs in.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for a named stage.
pub fn derive(parent: u64, label: &str) -> u64 {
    splitmix64(parent ^ fnv1a(label.as_bytes()))
}

/// Child seed for the `index`-th work item of a stage.
pub fn derive_indexed(parent: u64, label: &str, index: u64) -> u64 {
    splitmix64(derive(parent, label) ^ splitmix64(index))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
