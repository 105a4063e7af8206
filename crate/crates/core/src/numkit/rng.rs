//! Seed derivation for independent, order-free random streams.
//!
//! Every consumer of randomness gets its own ChaCha8 stream keyed by a seed
//! derived from a master seed and a path of tags, e.g.
//! `(master, branch_index, SAMPLING)`. Streams never share state, so the
//! order in which branches run cannot change any draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream tags. Values are arbitrary but frozen: changing one changes every result.
pub mod tag {
    pub const BRANCH: u64 = 0x6272_616e_6368;
    pub const SAMPLING: u64 = 0x7361_6d70;
    pub const INIT: u64 = 0x696e_6974;
    pub const DROPOUT: u64 = 0x6472_6f70;
    pub const SYNTH: u64 = 0x7379_6e74;
    pub const NOISE: u64 = 0x6e6f_6973;
    pub const SPLIT: u64 = 0x7370_6c74;
    pub const RUN: u64 = 0x7275_6e;
    pub const SWEEP: u64 = 0x7377_6570;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a path of tags into `seed`.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, path))
}

/// Seed owned by branch `index` of an ensemble trained under `master_seed`.
pub fn branch_seed(master_seed: u64, index: usize) -> u64 {
    derive_seed(master_seed, &[tag::BRANCH, index as u64])
}
