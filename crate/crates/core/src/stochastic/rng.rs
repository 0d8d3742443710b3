//! Counter-keyed random streams.
//!
//! Each Monte Carlo iteration owns an independent ChaCha8 stream selected by
//! `(master seed, iteration index)`; cells consume consecutive words of that
//! stream in row-major order. Any iteration can therefore be replayed on its
//! own, and parallel runs reproduce the serial draws exactly.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::normal::standard_normal_quantile;

/// 2⁻⁵³
const UNIT: f64 = 1.0 / (1u64 << 53) as f64;

/// Key material derived once from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey([u8; 32]);

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed).get_seed())
    }

    pub fn stream(&self, index: u64) -> NoiseStream {
        let mut rng = ChaCha8Rng::from_seed(self.0);
        rng.set_stream(index);
        NoiseStream { rng }
    }
}

/// Uniform and standard normal variates for one iteration.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(seed: u64, index: u64) -> Self {
        StreamKey::new(seed).stream(index)
    }

    /// Uniform on the open interval (0, 1): the 53 high bits of one word,
    /// offset by half a step.
    pub fn next_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * UNIT
    }

    /// Standard normal by inversion of one uniform.
    pub fn next_standard_normal(&mut self) -> f64 {
        standard_normal_quantile(self.next_uniform())
    }
}

/// SplitMix64 finalizer, used to derive child seeds from `(seed, index)`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
