//! Deterministic random-stream derivation.
//!
//! Every stochastic component draws from a ChaCha stream addressed by
//! `(master seed, run index, domain, lane)`. Streams are independent by
//! construction, so Monte-Carlo runs can execute in parallel in any order and
//! still reproduce bit-identical results for a given master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains; keep values disjoint per consumer.
pub mod domain {
    pub const TRUTH: u64 = 0;
    pub const DECOMPOSITION: u64 = 1;
    pub const KERNEL: u64 = 2;
    pub const CONSTANT: u64 = 3;
    pub const PF: u64 = 4;
    pub const SAMPLING: u64 = 5;
}

/// Lanes within a filter domain.
pub mod lane {
    pub const INIT: u64 = 0;
    pub const AUX: u64 = 1;
    /// Lane of particle `i`'s private noise stream.
    pub fn particle(i: usize) -> u64 {
        2 + i as u64
    }
}

/// Addresses the random streams of one (run, domain) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    pub master: u64,
    pub run: u64,
    pub domain: u64,
}

impl StreamKey {
    pub fn new(master: u64, run: u64, domain: u64) -> Self {
        Self { master, run, domain }
    }

    /// Independent generator for one lane of this key.
    pub fn rng(&self, lane: u64) -> ChaCha8Rng {
        let seed = mix(self.master ^ mix(self.run.wrapping_add(0x9e37_79b9_7f4a_7c15)));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream((self.domain << 40) ^ lane);
        rng
    }
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
