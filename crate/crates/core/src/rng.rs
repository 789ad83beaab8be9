//! Deterministic random streams.
//!
//! Every consumer derives its generator from a master seed and a stream
//! index, so parallel trials reproduce regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for stream `stream` of the master seed `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Stream index for trial `trial` of campaign group `group`.
pub fn trial_stream(group: u32, trial: u32) -> u64 {
    (u64::from(group) << 32) | u64::from(trial)
}
