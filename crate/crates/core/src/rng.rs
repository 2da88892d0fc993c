//! Reproducible random streams.
//!
//! Every stream is a ChaCha8 keystream whose 256-bit key is the tuple
//! `(master, a, b, c)`. Distinct tuples give independent streams, so a
//! replicate can be regenerated in isolation from its coordinates, in any
//! order and on any thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Tags for the third coordinate so simulation and resampling streams of the
/// same replicate never overlap.
pub mod purpose {
    pub const SIMULATE: u64 = 1;
    pub const RESAMPLE: u64 = 2;
    pub const LYAPUNOV: u64 = 3;
    pub const SEED: u64 = 4;
}

pub fn stream(master: u64, a: u64, b: u64, c: u64) -> StreamRng {
    let mut key = [0u8; 32];
    for (chunk, word) in key.chunks_exact_mut(8).zip([master, a, b, c]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Derive a child master seed, used when a whole sub-procedure (such as a
/// full bootstrap inside one Monte Carlo replication) takes its own seed.
pub fn child_seed(master: u64, a: u64, b: u64) -> u64 {
    use rand::RngCore;
    stream(master, a, b, purpose::SEED).next_u64()
}
