//! Seed-derived random streams.
//!
//! Every independent unit of work (a forecast origin, a replication, a chain)
//! owns a ChaCha stream addressed by `(seed, stream id)`, so parallel execution
//! order never changes results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream for `(seed, id)`. Distinct ids give independent ChaCha streams.
pub fn stream(seed: u64, id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Combine structured identifiers (horizon, origin, model, ...) into one stream id.
pub fn stream_id(parts: &[u64]) -> u64 {
    // splitmix64 chaining
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        let mut z = h ^ p.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}
