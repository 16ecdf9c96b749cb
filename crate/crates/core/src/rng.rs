//! Deterministic randomness.
//!
//! Every random quantity in the crate is derived from a 64-bit seed plus a
//! stream index (a hash row, an example id, ...), using ChaCha8 with the stream
//! selected through its nonce. Streams are independent and can be regenerated
//! in any order.

use rand::distr::{Distribution, Open01};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use xxhash_rust::xxh3::{xxh3_64, Xxh3};

/// Generator for stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stable 64-bit hash; identical across platforms and releases.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    xxh3_64(bytes)
}

/// Stable hash of an ordered pair of strings.
pub fn stable_hash_pair(a: &str, b: &str) -> u64 {
    let mut h = Xxh3::new();
    h.update(a.as_bytes());
    // 0xff never occurs in UTF-8, so the split point is unambiguous
    h.update(&[0xff]);
    h.update(b.as_bytes());
    h.digest()
}

/// A uniform draw on the open interval (0, 1) determined by `(seed, key)`.
pub fn keyed_unit(seed: u64, key: &str) -> f64 {
    let mut rng = stream_rng(seed, stable_hash(key.as_bytes()));
    Open01.sample(&mut rng)
}

/// Maps a 64-bit hash onto (0, 1] with 53 bits of resolution.
pub fn hash_to_unit(h: u64) -> f64 {
    ((h >> 11) + 1) as f64 / (1u64 << 53) as f64
}
