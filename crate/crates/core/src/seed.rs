//! Deterministic fan-out of one top-level seed into per-component streams.

use sha2::{Digest, Sha256};

/// Independent-looking seed for the component named `tag`.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("digest holds 8 bytes"))
}
