//! Seed derivation.
//!
//! One user-facing seed is split into independent per-stage seeds by hashing
//! the stage label with 64-bit FNV-1a, xoring it into the master seed and
//! finalizing with the SplitMix64 mixer:
//!
//! `derive(seed, label) = splitmix64(seed ^ fnv1a64(label))`
//!
//! Stage labels used across the workspace are the constants below.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STAGE_SPLIT: &str = "split";
pub const STAGE_TRAIN: &str = "train";
pub const STAGE_GENERATE: &str = "generate";
pub const STAGE_CLASSIFIER: &str = "classifier";
pub const STAGE_PRIVACY: &str = "privacy";

pub type Rng = ChaCha8Rng;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn derive(seed: u64, label: &str) -> u64 {
    splitmix64(seed ^ fnv1a64(label.as_bytes()))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stage_rng(seed: u64, label: &str) -> Rng {
    rng(derive(seed, label))
}
