//! Seedable, splittable generators for reproducible Monte-Carlo runs.
//!
//! Every random stream in the crate is a ChaCha20 generator keyed by a root
//! seed; independent tasks use distinct stream ids under the same key, so
//! results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type SimRng = ChaCha20Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Stream `stream` of the generator keyed by `seed`.
pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
