//! Seeded random streams.
//!
//! Every random draw in the crate flows from one master seed through named
//! sub-streams (`env`, `policy`, `noise`, ...), so runs reproduce exactly for
//! any worker count. Streams are ChaCha8 generators whose full position can be
//! captured and restored, which the checkpoint round-trip relies on.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Stable 64-bit FNV-1a. Used instead of `DefaultHasher`, whose output is
/// randomized per process and would break cross-run reproducibility.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive the seed of a named sub-stream from a master seed.
pub fn substream_seed(master: u64, name: &str) -> u64 {
    let mut bytes = Vec::with_capacity(8 + name.len());
    bytes.extend_from_slice(&master.to_le_bytes());
    bytes.extend_from_slice(name.as_bytes());
    fnv1a64(&bytes)
}

/// Derive an indexed seed under a named sub-stream (for per-environment or
/// per-episode streams).
pub fn indexed_seed(master: u64, name: &str, index: u64) -> u64 {
    let mut bytes = Vec::with_capacity(16 + name.len());
    bytes.extend_from_slice(&master.to_le_bytes());
    bytes.extend_from_slice(name.as_bytes());
    bytes.extend_from_slice(&index.to_le_bytes());
    fnv1a64(&bytes)
}

/// Create the generator for a named sub-stream.
pub fn substream(master: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(master, name))
}

/// Exact serialized state of a ChaCha8 stream (seed, stream id, word position).
/// Restoring it resumes the stream bit-for-bit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        RngState {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

/// Draw a fresh 64-bit seed from a generator (for auto-reset episode seeds).
pub fn draw_seed(rng: &mut ChaCha8Rng) -> u64 {
    rng.next_u64()
}
