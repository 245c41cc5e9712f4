//! Named, derived RNG substreams.
//!
//! Every stochastic component draws from its own stream derived from the
//! master seed and a component name, so adding a component never perturbs
//! the draws of existing ones. Streams are ChaCha12 keyed by
//! SHA-256(master seed || name), which keeps runs reproducible across
//! platforms and thread counts.

use rand_chacha::ChaCha12Rng;
use rand_chacha::rand_core::SeedableRng;
use sha2::{Digest, Sha256};

/// Derive the RNG stream for a named component.
pub fn substream(master_seed: u64, name: &str) -> ChaCha12Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"hipode.substream.v1");
    hasher.update(master_seed.to_le_bytes());
    hasher.update(name.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha12Rng::from_seed(key)
}

/// Derive a per-item stream, e.g. one per generated transition or episode.
pub fn indexed_substream(master_seed: u64, name: &str, index: u64) -> ChaCha12Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"hipode.substream.v1");
    hasher.update(master_seed.to_le_bytes());
    hasher.update(name.as_bytes());
    hasher.update(b"#");
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha12Rng::from_seed(key)
}
