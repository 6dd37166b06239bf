//! Seed handling.
//!
//! Every random draw in the crate flows from one 64-bit seed. Work items are
//! given independent ChaCha streams keyed by a counter, so a campaign produces
//! identical output no matter how items are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// RNG for the root seed.
pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// RNG for work item `key` derived from `seed`.
pub fn stream(seed: u64, key: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(key);
    r
}
