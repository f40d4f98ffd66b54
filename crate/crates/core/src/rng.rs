//! Seeding helpers. Every random stream in the crate is a ChaCha8 generator
//! derived from a user seed and a stream label, so results do not depend on
//! thread scheduling or iteration order elsewhere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent child seed for stream `k` of `seed`.
pub fn child_seed(seed: u64, k: u64) -> u64 {
    mix(mix(seed) ^ mix(k.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn child_rng(seed: u64, k: u64) -> Rng {
    rng(child_seed(seed, k))
}
