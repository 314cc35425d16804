//! Seeded random streams.
//!
//! Every stochastic consumer draws from its own ChaCha stream derived from
//! the run seed, so adding a consumer never perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init,
    Shuffle,
    Negatives,
    Sampling,
    Theory,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Init => 1,
            Stream::Shuffle => 2,
            Stream::Negatives => 3,
            Stream::Sampling => 4,
            Stream::Theory => 5,
        }
    }
}

/// Returns the generator for `stream` under the run seed `seed`.
pub fn stream(seed: u64, stream: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}
