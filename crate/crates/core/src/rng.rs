//! Seed-splittable random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator number `index` derived from `master`.
///
/// Streams can be created in any order, so parallel consumers see the
/// same draws as a sequential loop.
pub fn stream_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}
