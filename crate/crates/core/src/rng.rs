//! Counter-based random streams.
//!
//! Every random draw made during an iteration comes from a ChaCha stream
//! addressed by `(chain key, iteration, lane)`. A lane is a disjoint block of
//! the keystream reserved for one purpose (auxiliary draws, the categorical
//! selection, or one proposal slot). Because the address does not depend on
//! which worker performs the draw, sampled values are identical for any
//! worker count or schedule.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Each lane owns 2^48 32-bit words of keystream.
const LANE_SHIFT: u32 = 48;

/// Purpose of a substream within one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lane {
    /// Intermediate points, momenta, rotations, edge lengths.
    Aux,
    /// Uniforms used for categorical selection (one per jump).
    Selection,
    /// Randomness for proposal slot `j` (1-based, as in the cloud).
    Slot(usize),
}

impl Lane {
    fn index(self) -> u128 {
        match self {
            Lane::Aux => 0,
            Lane::Selection => 1,
            Lane::Slot(j) => 1 + j as u128,
        }
    }
}

/// Key for one chain. Independent chains of the same run get distinct keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainKey([u8; 32]);

impl ChainKey {
    pub fn new(seed: u64, chain: u64) -> Self {
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        master.set_stream(chain);
        let mut key = [0u8; 32];
        master.fill_bytes(&mut key);
        ChainKey(key)
    }

    pub fn iteration(&self, iteration: u64) -> IterationStreams {
        IterationStreams {
            key: self.0,
            iteration,
        }
    }
}

/// Substream factory for a single iteration.
#[derive(Debug, Clone, Copy)]
pub struct IterationStreams {
    key: [u8; 32],
    iteration: u64,
}

impl IterationStreams {
    pub fn lane(&self, lane: Lane) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(self.iteration);
        rng.set_word_pos(lane.index() << LANE_SHIFT);
        rng
    }

    pub fn aux(&self) -> ChaCha8Rng {
        self.lane(Lane::Aux)
    }

    pub fn selection(&self) -> ChaCha8Rng {
        self.lane(Lane::Selection)
    }

    pub fn slot(&self, j: usize) -> ChaCha8Rng {
        self.lane(Lane::Slot(j))
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }
}
