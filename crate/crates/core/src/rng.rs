//! Named random streams derived from a single seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Synth = 1,
    Split = 2,
    Mask = 3,
    Init = 4,
    Shuffle = 5,
    Pool = 6,
}

/// Independent generator for `stream`; the same `(seed, stream)` pair always
/// yields the same sequence.
pub fn stream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
