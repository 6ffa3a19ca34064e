//! Per-run random streams.
//!
//! Every run draws from independent ChaCha streams keyed by
//! `(seed, run, role)`, so truth draws do not depend on which estimators a
//! campaign contains and results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Truth = 0,
    Noise = 1,
    Estimator = 2,
}

pub fn stream(seed: u64, run: usize, role: Role) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64 * 3 + role as u64);
    rng
}

/// Estimator stream for the estimator at position `slot` of its scenario's
/// registry. Slots occupy disjoint regions of the stream.
pub fn estimator_stream(seed: u64, run: usize, slot: usize) -> ChaCha8Rng {
    let mut rng = stream(seed, run, Role::Estimator);
    rng.set_word_pos((slot as u128) << 60);
    rng
}
