//! Seed splitting.
//!
//! Every random decision derives from one 64-bit run seed. A stage asks for a
//! stream by label; the stream seed is the first eight bytes (little endian) of
//! `SHA-256(seed.to_le_bytes() || label)`, and the stream itself is ChaCha8
//! seeded from that value. Labels are plain strings such as `"profiles"` or
//! `"fim/12/40"`, so any stage can be replayed without running its
//! predecessors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

pub fn stream_seed(seed: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn stream_rng(seed: u64, label: &str) -> StreamRng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, label))
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based uniform in `[0, 1)` keyed by `(stream, i, j)`.
///
/// `z = splitmix64(splitmix64(stream ^ splitmix64(i)) ^ j)`, then the top 53
/// bits of `z` scaled by `2^-53`. The value for a pair does not depend on the
/// order in which pairs are visited.
#[inline]
pub fn pair_uniform(stream: u64, i: u64, j: u64) -> f64 {
    let z = splitmix64(splitmix64(stream ^ splitmix64(i)) ^ j);
    (z >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
