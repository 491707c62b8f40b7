//! Seeded random streams.
//!
//! All randomness comes from ChaCha20 (a counter-based generator) keyed by a
//! 64-bit seed. Independent purposes draw from distinct ChaCha stream ids, so
//! adding a draw in one place never shifts the numbers seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Identifier written into every output file next to the seed.
pub const GENERATOR_ID: &str = "chacha20-stream-v1";

pub const STREAM_SIGNAL: u64 = 1;
pub const STREAM_OPERATOR: u64 = 2;
pub const STREAM_NOISE: u64 = 3;
pub const STREAM_DSM_NOISE: u64 = 4;
pub const STREAM_PRIOR_SAMPLES: u64 = 5;

pub fn stream(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a sequence of words; stable across platforms and releases.
pub fn hash_words(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x243f_6a88_85a3_08d3, |acc, &w| mix64(acc ^ mix64(w)))
}
