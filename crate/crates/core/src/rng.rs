//! Seed derivation shared by every seeded component.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes a stream tag and index into a base seed.
pub fn derive(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(stream)) ^ index)
}

pub fn stream(seed: u64, stream: u64, index: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, stream, index))
}

#[cfg(test)]
pub fn from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// Stream tags. Distinct constants keep independent consumers decorrelated.
pub const CORPUS: u64 = 0x01;
pub const SPLIT: u64 = 0x02;
pub const SKIPGRAM: u64 = 0x10;
pub const CLEORA: u64 = 0x11;
pub const CLEORA_PROJECTION: u64 = 0x12;
pub const RNN: u64 = 0x13;
pub const INIT: u64 = 0x20;
pub const DROPOUT: u64 = 0x21;
pub const INTERPOLATE: u64 = 0x22;
pub const EPOCH: u64 = 0x30;
pub const NOISE: u64 = 0x31;
pub const CLASSIFIER: u64 = 0x40;
