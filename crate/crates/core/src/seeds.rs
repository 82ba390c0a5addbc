//! Deterministic seed derivation for parallel sweeps.
//!
//! A task seed depends only on the master seed and the task coordinates, so
//! results do not depend on scheduling or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type SimRng = ChaCha8Rng;

/// Independent streams drawn from one task seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Disorder = 0,
    Chain = 1,
    Auxiliary = 2,
}

/// SHA-256 of the little-endian master seed and coordinates, truncated to 64 bits.
pub fn task_seed(master_seed: u64, coords: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(b"u1qec-task-v1");
    h.update(master_seed.to_le_bytes());
    for c in coords {
        h.update(c.to_le_bytes());
    }
    let digest = h.finalize();
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(out)
}

/// Seed for the sweep task `(alpha_index, L, realization)`.
pub fn realization_seed(master_seed: u64, point_index: usize, size: usize, realization: usize) -> u64 {
    task_seed(master_seed, &[point_index as u64, size as u64, realization as u64])
}

pub fn rng(seed: u64, stream: Stream) -> SimRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream as u64);
    r
}
