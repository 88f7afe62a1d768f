//! Seed derivation and stable content hashes.
//!
//! Every stochastic component draws from a ChaCha stream whose seed is
//! derived from a base seed and a `(label, index)` pair, so replicas and grid
//! points can be replayed individually and independently of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// The generator used throughout the crate.
pub type SimRng = ChaCha12Rng;

/// First eight bytes (little endian) of the SHA-256 digest of `bytes`.
pub fn stable_hash64(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(out)
}

/// Derive a child seed from `base` for the stream named `label` at `index`.
pub fn derive_seed(base: u64, label: &str, index: u64) -> u64 {
    let mut buf = Vec::with_capacity(16 + label.len());
    buf.extend_from_slice(&base.to_le_bytes());
    buf.extend_from_slice(label.as_bytes());
    buf.extend_from_slice(&index.to_le_bytes());
    stable_hash64(&buf)
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derived_seeds_are_distinct_and_stable() {
        let a = derive_seed(7, "replica", 0);
        let b = derive_seed(7, "replica", 1);
        let c = derive_seed(7, "chain", 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(7, "replica", 0));
    }

    #[test]
    fn same_seed_same_stream() {
        let mut r1 = rng_from_seed(42);
        let mut r2 = rng_from_seed(42);
        for _ in 0..16 {
            assert_eq!(r1.random::<u64>(), r2.random::<u64>());
        }
    }
}
