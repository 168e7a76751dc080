//! Seed derivation. Every task draws from its own stream keyed by
//! `(master_seed, task_id)`, so generation order and parallelism never
//! change outputs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type TaskRng = ChaCha8Rng;

pub fn derive_seed(master_seed: u64, stream: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update(stream.as_bytes());
    h.finalize().into()
}

pub fn stream(master_seed: u64, stream: &str) -> TaskRng {
    ChaCha8Rng::from_seed(derive_seed(master_seed, stream))
}
