//! Seeded random number generation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every seeded draw in this crate.
pub const ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9, seed_from_u64)";

/// Deterministic generator for a 64-bit seed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent child seed for item `index` of a job seeded with `seed`
/// (SplitMix64 finaliser of `seed + (index + 1) * golden`).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_seed_same_stream() {
        let a: Vec<u64> = seeded_rng(5).random_iter().take(4).collect();
        let b: Vec<u64> = seeded_rng(5).random_iter().take(4).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn derived_seeds_differ() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(7, i)).collect();
        assert_eq!(s.len(), 1000);
        assert_ne!(derive_seed(0, 1), derive_seed(1, 0));
    }
}
