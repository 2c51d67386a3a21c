//! Seeded, portable random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by a
//! 64-bit master seed and a 64-bit stream id. Monte-Carlo replicates use
//! `stream = replicate * ROLES + role`, so each (replicate, role) pair has an
//! independent stream regardless of how replicates are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Number of stream roles reserved per replicate.
pub const ROLES: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Training and calibration rows.
    Fit = 0,
    /// Held-out test rows.
    Test = 1,
    /// Row permutations.
    Shuffle = 2,
}

pub fn seeded(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn stream_id(replicate: usize, role: Role) -> u64 {
    replicate as u64 * ROLES + role as u64
}

pub fn replicate_rng(seed: u64, replicate: usize, role: Role) -> SimRng {
    seeded(seed, stream_id(replicate, role))
}
