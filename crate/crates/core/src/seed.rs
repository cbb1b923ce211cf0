//! Seed splitting.
//!
//! Every random stream in the crate derives from one master seed. The
//! master seed is mixed with a per-purpose tag and an optional index (phase,
//! sample, replication) through SplitMix64, and the result seeds a ChaCha8
//! generator. Two streams with different tags or indices are independent for
//! all practical purposes, and every run is replayable from its master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Instance = 1,
    Estimator = 2,
    CardinalitySampling = 3,
    KnapsackSampling = 4,
    Rounding = 5,
    Replication = 6,
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derived seed for `(master, stream, index)`.
pub fn derive(master: u64, stream: Stream, index: u64) -> u64 {
    let a = splitmix64(master ^ splitmix64(stream as u64));
    splitmix64(a ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn rng(master: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, stream, 0))
}

pub fn rng_at(master: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, stream, index))
}
