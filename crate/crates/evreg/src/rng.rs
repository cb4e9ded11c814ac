//! Reproducible random streams for sampling and simulation.
//!
//! Draws come from ChaCha12 keystreams addressed by `(seed, stream id)`.
//! ChaCha is a counter-mode generator, so the j-th draw on a stream is a
//! pure function of `(seed, stream, j)`: replications can be evaluated in any
//! order and with any number of worker threads without changing a single
//! bit of output.
//!
//! Stream allocation: replication r draws its responses on stream `2r` and
//! per-replication covariates on `2r + 1`; covariates shared across all
//! replications live on the reserved stream `u64::MAX`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

pub const SHARED_COVARIATE_STREAM: u64 = u64::MAX;

pub fn response_stream(replication: u64) -> u64 {
    2 * replication
}

pub fn covariate_stream(replication: u64) -> u64 {
    2 * replication + 1
}

/// One addressable keystream.
pub struct Stream(ChaCha12Rng);

impl Stream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Stream(rng)
    }

    /// Uniform draw strictly inside (0, 1): 53 bits centered in the unit
    /// interval, so `ln(-ln u)` is always finite.
    pub fn uniform(&mut self) -> f64 {
        ((self.0.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    pub fn uniform_in(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.uniform()
    }
}
