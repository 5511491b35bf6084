//! Seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator seeded with a 64-bit value
//! obtained by hashing a parent seed with an index:
//!
//! ```text
//! derive_seed(base, index) = splitmix64(base ^ splitmix64(index + 0x9E3779B97F4A7C15))
//! ```
//!
//! `splitmix64` is the finaliser from Steele, Lea and Flood's SplitMix64 generator. The
//! scheme only needs 64-bit wrapping arithmetic, so another implementation can
//! reproduce the exact per-trial seeds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags used to split one trial seed into independent streams.
pub mod stream {
    pub const CLUSTER_VALUES: u64 = 1;
    pub const BSC_FLIPS: u64 = 2;
    pub const ERASURES: u64 = 3;
    pub const RECOMMEND: u64 = 4;
    pub const CHANNELS: u64 = 5;
    pub const REDRAW: u64 = 6;
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed number `index` of `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(index.wrapping_add(GOLDEN_GAMMA)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
