//! Stable keyed hashes used for seeds, selection order and idempotency keys.
//!
//! Everything here is SHA-256 based so values are identical across
//! platforms, toolchains and runs.

use sha2::{Digest, Sha256};

/// 64-bit hash of `data` keyed by `key`.
pub fn keyed_hash64(key: u64, data: &[u8]) -> u64 {
    let mut h = Sha256::new();
    h.update(key.to_le_bytes());
    h.update(data);
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// Seed for a sub-task named `label` under a parent seed.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    keyed_hash64(seed, label.as_bytes())
}

/// Lower-case hex SHA-256 of `data`.
pub fn sha256_hex(data: &[u8]) -> String {
    let d = Sha256::digest(data);
    d.iter().map(|b| format!("{b:02x}")).collect()
}
