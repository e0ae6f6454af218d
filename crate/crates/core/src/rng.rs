//! Seeded random streams.
//!
//! Every stream is a ChaCha8 keystream keyed by a 64-bit seed, with a 64-bit
//! stream selector for independent sub-streams under one seed. Streams are
//! reproducible bit-for-bit on any platform for a given `(seed, stream)` pair.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    pub fn stream(self, stream: u64) -> ChaCha8Rng {
        let mut rng = self.rng();
        rng.set_stream(stream);
        rng
    }

    /// Child seed for an indexed sub-task. Adding more indices never changes
    /// the seeds already handed out.
    pub fn derive(self, parts: &[u64]) -> Seed {
        let mut h = mix64(self.0 ^ 0x243f_6a88_85a3_08d3);
        for &p in parts {
            h = mix64(h ^ mix64(p.wrapping_add(0x9e37_79b9_7f4a_7c15)));
        }
        Seed(h)
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
