//! Seed expansion. One master seed fans out into independent streams
//! (init, shuffle, jitter, noise, phase offsets) via splitmix64.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One step of the splitmix64 generator.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed for sub-stream `tag` of `master`.
pub fn derive(master: u64, tag: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(tag.wrapping_mul(0xD6E8_FEB8_6659_FD93)))
}

pub fn rng(master: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, tag))
}

/// Well-known stream tags.
pub mod tags {
    pub const NOISE: u64 = 1;
    pub const PHASE_OFFSET: u64 = 2;
    pub const JITTER: u64 = 3;
    pub const INIT: u64 = 4;
    pub const SHUFFLE: u64 = 5;
    pub const SPLIT: u64 = 6;
}
