//! Seed-derived random streams.
//!
//! Every randomized routine in the crate takes an explicit `u64` seed. Work
//! that is split into independent units (patients, bootstrap iterations)
//! draws each unit from its own ChaCha stream so the output does not depend
//! on the order in which units are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Returns the RNG for unit `index` under `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Mixes a seed with an index into a fresh 64-bit seed (splitmix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
