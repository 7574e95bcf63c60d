//! Seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator seeded from a
//! 64-bit value. Child seeds are derived from a parent seed, a stream tag
//! and a counter with SplitMix64 finalization:
//!
//! ```text
//! derive(parent, tag, index) = mix(mix(parent ^ mix(tag)) + index)
//! ```
//!
//! so any sample can be regenerated in isolation from the master seed and
//! its index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 output function.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit tag for a stream name (FNV-1a).
pub fn tag(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3))
}

pub fn derive(parent: u64, stream: &str, index: u64) -> u64 {
    mix(mix(parent ^ mix(tag(stream))).wrapping_add(index))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(parent: u64, stream: &str, index: u64) -> ChaCha8Rng {
    rng(derive(parent, stream, index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derivation_is_stable_and_separates_streams() {
        assert_eq!(derive(42, "semgan", 3), derive(42, "semgan", 3));
        assert_ne!(derive(42, "semgan", 3), derive(42, "semgan", 4));
        assert_ne!(derive(42, "semgan", 3), derive(42, "pixsynth", 3));
        assert_ne!(derive(42, "semgan", 3), derive(43, "semgan", 3));
        let a: u64 = derived_rng(7, "x", 0).gen();
        let b: u64 = derived_rng(7, "x", 0).gen();
        assert_eq!(a, b);
    }
}
