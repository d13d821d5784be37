//! Named, reproducible random substreams.
//!
//! Every random draw in the crate descends from a single 64-bit run seed.
//! A substream is keyed by `(seed, name, index)` and hashed into a ChaCha8
//! key, so ensemble members get independent generators regardless of which
//! thread evaluates them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type SimRng = ChaCha8Rng;

pub fn substream(seed: u64, name: &str, index: u64) -> SimRng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((name.len() as u64).to_le_bytes());
    hasher.update(name.as_bytes());
    hasher.update(index.to_le_bytes());
    let key: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(key)
}
