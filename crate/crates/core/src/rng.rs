//! Seedable, splittable random streams.
//!
//! Every stochastic operation takes an explicit generator. Streams are
//! ChaCha8 instances keyed by the experiment seed and separated by a stream
//! id, so two stages never share a sequence and results do not depend on
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream used for the design matrix.
pub const STREAM_DESIGN: u64 = 1;
/// Stream used for the noise vector.
pub const STREAM_NOISE: u64 = 2;
/// Stream used for the support and signs of theta.
pub const STREAM_THETA: u64 = 3;
/// Stream used by the sampler.
pub const STREAM_CHAIN: u64 = 4;
/// Stream used by the restricted-eigenvalue estimate.
pub const STREAM_KAPPA: u64 = 5;

pub fn stream(seed: u64, stream_id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}
