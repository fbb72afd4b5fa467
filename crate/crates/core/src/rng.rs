//! Seeded random streams.
//!
//! Every replica draws from `stream(seed, k)`: a ChaCha8 generator keyed by
//! the 64-bit master seed with its stream id set to the replica index `k`.
//! Distinct `k` give non-overlapping sequences, so a run can be extended
//! with more replicas without disturbing the existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn stream(seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
