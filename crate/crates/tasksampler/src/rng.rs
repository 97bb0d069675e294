//! Seedable, splittable random streams.
//!
//! Every logical sequence of draws (task sampling, episode construction,
//! evaluation, data generation) gets its own ChaCha stream so that consuming
//! draws in one sequence never perturbs another. Identical seed and stream id
//! always reproduce the identical sequence.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TaskRng = ChaCha8Rng;

/// A ChaCha generator seeded by `seed` on the given independent stream.
pub fn stream_rng(seed: u64, stream: u64) -> TaskRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.into());
    rng
}
