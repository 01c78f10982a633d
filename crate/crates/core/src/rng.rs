//! Counter-based seeding: every chunk of Monte Carlo work gets its own ChaCha
//! stream derived from `(seed, chunk)`, so results do not depend on how rayon
//! schedules the chunks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Trials per independently seeded chunk.
pub const CHUNK: usize = 4096;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Splits `trials` into `(chunk_index, len)` pieces of at most [`CHUNK`].
pub fn chunks(trials: usize) -> Vec<(u64, usize)> {
    (0..trials.div_ceil(CHUNK))
        .map(|k| (k as u64, CHUNK.min(trials - k * CHUNK)))
        .collect()
}
