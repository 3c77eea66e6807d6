//! Keyed randomness.
//!
//! Every random decision of a round is a pure function of `(seed, stream, key)`,
//! so results do not depend on evaluation order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stream tags. Distinct tags give unrelated draws for the same key.
pub mod stream {
    pub const ACTIVATE: u64 = 1;
    pub const EQUALIZE: u64 = 2;
    pub const ATTEMPT: u64 = 3;
    pub const ROUND: u64 = 4;
    pub const TRIAL: u64 = 5;
    pub const FINISH: u64 = 6;
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A splitmix-style pseudo-random function `key -> u64` bound to a seed and stream.
#[derive(Debug, Clone, Copy)]
pub struct Prf {
    base: u64,
}

impl Prf {
    pub fn new(seed: u64, stream: u64) -> Self {
        Prf {
            base: mix64(seed ^ mix64(stream.wrapping_mul(GOLDEN))),
        }
    }

    #[inline]
    pub fn bits(&self, key: u64) -> u64 {
        mix64(self.base.wrapping_add(key.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn unit(&self, key: u64) -> f64 {
        (self.bits(key) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Child seed number `index` of `seed` on `stream`.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    Prf::new(seed, stream).bits(index)
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
