//! Deterministic seed derivation. Every sample gets its own RNG stream, so
//! results do not depend on how samples are spread across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a stream tag and an index.
pub fn derive(base: u64, tag: u64, index: u64) -> u64 {
    splitmix(splitmix(splitmix(base) ^ tag) ^ index)
}

pub fn rng(base: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, tag, index))
}

pub const INIT: u64 = 0x494e_4954;
pub const SHUFFLE: u64 = 0x5348_5546;
pub const CONV_TRAIN: u64 = 0x434f_4e56;
pub const FC_TRAIN: u64 = 0x4643_5452;
pub const FEATURES_TRAIN: u64 = 0x4645_5452;
pub const FEATURES_EVAL: u64 = 0x4645_4556;
