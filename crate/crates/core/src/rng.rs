//! Seeded, splittable random streams on top of ChaCha8.
//!
//! A `SeededStream` names a ChaCha stream by `(seed, stream_id)`. Work is cut into
//! blocks; block `b` starts at word offset `b * 2^36` of the stream, so blocks never
//! overlap and a block's draws do not depend on which thread consumes it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const BLOCK_SHIFT: u32 = 36;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeededStream {
    pub seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeededStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        SeededStream { seed, stream_id }
    }

    /// Generator positioned at the start of the stream.
    pub fn rng(&self) -> ChaCha8Rng {
        self.block(0)
    }

    /// Generator positioned at the start of block `b`.
    pub fn block(&self, b: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng.set_word_pos(u128::from(b) << BLOCK_SHIFT);
        rng
    }

    /// Derived stream for the `k`-th independent sub-experiment.
    pub fn child(&self, k: u64) -> SeededStream {
        SeededStream { seed: self.seed, stream_id: splitmix64(self.stream_id ^ splitmix64(k.wrapping_add(1))) }
    }
}
