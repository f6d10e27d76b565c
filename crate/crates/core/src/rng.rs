//! Keyed, counter-based random streams.
//!
//! Every random draw in the toolkit comes from a [`StreamKey`]: a global seed,
//! a dataset index and a lane (which sub-task of the dataset is drawing). The
//! key is hashed into a ChaCha8 key and the replication index selects the
//! ChaCha stream, so any (seed, dataset, lane, replication) tuple yields the
//! same numbers no matter which thread asks for them or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Well-known lanes. Lanes only need to be distinct within one dataset.
pub mod lanes {
    pub const FIELD: u64 = 0;
    pub const SITES: u64 = 1;
    pub const PARAMS: u64 = 2;
    pub const MIX_AD: u64 = 3;
    pub const MIX_AI: u64 = 4;
    pub const SPLIT: u64 = 5;
    pub const INIT: u64 = 6;
    pub const SHUFFLE: u64 = 7;
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finaliser.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub seed: u64,
    pub dataset: u64,
    pub lane: u64,
}

impl StreamKey {
    pub fn new(seed: u64, dataset: u64) -> Self {
        Self {
            seed,
            dataset,
            lane: lanes::FIELD,
        }
    }

    pub fn with_lane(self, lane: u64) -> Self {
        Self { lane, ..self }
    }

    /// Derives a child key, e.g. for the components of a mixture.
    pub fn fork(self, tag: u64) -> Self {
        Self {
            seed: mix64(self.seed ^ mix64(self.lane.wrapping_add(GOLDEN))),
            dataset: self.dataset,
            lane: tag,
        }
    }

    fn key_bytes(&self) -> [u8; 32] {
        let mut state = mix64(self.seed.wrapping_add(GOLDEN));
        state = mix64(state ^ self.dataset.wrapping_mul(GOLDEN).wrapping_add(1));
        state = mix64(state ^ self.lane.wrapping_mul(GOLDEN).wrapping_add(2));
        let mut key = [0u8; 32];
        for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
            let word = mix64(state.wrapping_add((i as u64 + 1).wrapping_mul(GOLDEN)));
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        key
    }

    /// The stream for one replication (or any other counter) under this key.
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key_bytes());
        rng.set_stream(index);
        rng
    }
}
