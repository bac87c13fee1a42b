//! Named, seeded random streams.
//!
//! Every random decision in the pipeline draws from a ChaCha8 stream keyed by
//! the experiment seed and a fixed stream id, so results never depend on call
//! order across subsystems or on worker counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Dataset = 1,
    TrainTrajectories = 2,
    ValidationTrajectories = 3,
    Init = 4,
    Shuffle = 5,
    Dropout = 6,
    TestNoise = 7,
    Sweep = 8,
    Ambiguity = 9,
    History = 10,
    Baseline = 11,
    Track = 12,
    Fold = 13,
}

/// A stream for `(seed, name)`.
pub fn stream(seed: u64, name: Stream) -> Rng {
    substream(seed, name, 0)
}

/// The `index`-th sub-stream of a named stream (per epoch, per chunk, ...).
pub fn substream(seed: u64, name: Stream, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((name as u64) << 40) ^ index);
    rng
}

/// A fresh seed for an independent repetition, e.g. one training fold.
pub fn derive_seed(seed: u64, name: Stream, index: u64) -> u64 {
    use rand::RngCore;
    substream(seed, name, index).next_u64()
}
