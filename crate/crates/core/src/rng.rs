//! Keyed random streams.
//!
//! Every random decision in the crate is drawn from a stream whose seed is a
//! pure function of a master seed and a short list of integer keys (pair
//! indices, bootstrap draw, replicate, fold...). Results therefore do not
//! depend on how work is scheduled across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Key namespaces so that different consumers never share a stream.
pub mod domain {
    pub const TIES: u64 = 0x7469_6573;
    pub const BOOTSTRAP: u64 = 0x626f_6f74;
    pub const SPLIT: u64 = 0x7370_6c74;
    pub const REPLICATE: u64 = 0x7265_706c;
    pub const SELECT: u64 = 0x7365_6c63;
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `keys` into `seed`, one splitmix round per key.
pub fn derive_seed(seed: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix64(seed), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

pub fn keyed_rng(seed: u64, keys: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, keys))
}

/// Fair coins for random tie-breaking, consumed one bit at a time.
#[derive(Debug, Clone)]
pub struct TieStream {
    rng: ChaCha8Rng,
    buf: u64,
    left: u32,
}

impl TieStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            buf: 0,
            left: 0,
        }
    }

    /// Independent stream for the ordered model pair `(m, j)`.
    pub fn for_pair(seed: u64, m: usize, j: usize) -> Self {
        Self::new(derive_seed(seed, &[domain::TIES, m as u64, j as u64]))
    }

    #[inline]
    pub fn coin(&mut self) -> bool {
        if self.left == 0 {
            self.buf = self.rng.next_u64();
            self.left = 64;
        }
        let bit = self.buf & 1 == 1;
        self.buf >>= 1;
        self.left -= 1;
        bit
    }
}
