//! Seeded randomness.
//!
//! Every random draw in the crate goes through [`seeded`], a ChaCha8 stream
//! keyed from a single 64-bit seed. Identical seeds give identical draws.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as Rng;

pub const DEFAULT_SEED: u64 = 0x5eed_f4ac_1a9c_0001;

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Derive an independent stream for sub-task `tag` of a run seeded with `seed`.
pub fn substream(seed: u64, tag: u64) -> Rng {
    let mut r = Rng::seed_from_u64(seed);
    r.set_stream(tag);
    r
}
