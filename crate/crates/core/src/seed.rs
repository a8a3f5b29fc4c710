//! Seed derivation: independent deterministic RNG streams keyed by
//! `(seed, a, b)` so per-item randomness does not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn mix(seed: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b)
}

pub fn stream(seed: u64, a: u64, b: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(mix(seed, a, b))
}

/// Stable 64-bit key for a text identifier.
pub fn text_key(text: &str) -> u64 {
    let digest = Sha256::digest(text.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, 1, 2).random();
        let b: u64 = stream(7, 1, 2).random();
        let c: u64 = stream(7, 2, 1).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
