//! Random number generation.
//!
//! Every stochastic component draws from [`ChaCha8Rng`], a counter-based
//! generator. Independent streams (replications, restarts, held-out
//! trajectories) get their seeds from [`split_seed`], which mixes a parent
//! seed with a stream index through two rounds of SplitMix64. Reproduction
//! across implementations is statistical; within this crate it is bitwise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of child stream `stream` derived from `seed`.
pub fn split_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream.wrapping_mul(0xD1B5_4A32_D192_ED03)))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn streams_differ_and_repeat() {
        let a = split_seed(7, 0);
        let b = split_seed(7, 1);
        assert_ne!(a, b);
        assert_eq!(a, split_seed(7, 0));
        let x: f64 = rng_from_seed(a).random();
        let y: f64 = rng_from_seed(a).random();
        assert_eq!(x.to_bits(), y.to_bits());
    }
}
