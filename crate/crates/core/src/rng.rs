//! Counter-based random streams.
//!
//! Every random draw in a run comes from a stream identified by
//! `(root seed, purpose tag, iteration, particle)`. Streams never overlap, so
//! particle moves can be computed in any order (or in parallel) and still give
//! bitwise-identical results for a given root seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator type used throughout the crate.
pub type SmcRng = ChaCha8Rng;

/// Purpose tags separating independent stream families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamTag {
    Init = 1,
    Resample = 2,
    Mutate = 3,
    Uniformize = 4,
    Approximation = 5,
    Auxiliary = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Returns the generator for `(seed, tag, iteration, index)`.
pub fn stream(seed: u64, tag: StreamTag, iteration: usize, index: usize) -> SmcRng {
    let key = splitmix64(splitmix64(seed) ^ (tag as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(((iteration as u64) << 32) | (index as u64 & 0xFFFF_FFFF));
    rng
}

/// A plain generator seeded from a single integer (tests, data generation).
pub fn seeded(seed: u64) -> SmcRng {
    ChaCha8Rng::seed_from_u64(seed)
}
