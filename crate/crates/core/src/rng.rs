//! Seeded random streams.
//!
//! Every random quantity in the crate is drawn from ChaCha8 seeded with
//! `seed_from_u64(seed)` and positioned on an explicit stream with
//! `set_stream(stream)`. Streams used by the crate:
//!
//! | stream | consumer |
//! |--------|----------|
//! | 0 | scenario generation (graph, weights, baselines) |
//! | 1 | [`simulate`](crate::simulate) of a single path |
//! | `REPLICATION_BASE + r` | replication `r` of a batch of simulations |
//!
//! Independent replications therefore never share random numbers and can run in
//! any order or in parallel with identical results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub const SCENARIO_STREAM: u64 = 0;
pub const SIMULATION_STREAM: u64 = 1;
pub const REPLICATION_BASE: u64 = 1 << 32;

/// Generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generator for replication `r` of a batch seeded with `seed`.
pub fn replication_rng(seed: u64, r: u64) -> SimRng {
    stream_rng(seed, REPLICATION_BASE + r)
}

/// Uniform draw on `[0, 1)`.
#[inline]
pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

/// Exponential waiting time with the given rate.
#[inline]
pub fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    -crate::math::ln(1.0 - uniform(rng)) / rate
}

/// Index drawn with probability proportional to `weights` (which sum to `total`).
pub fn categorical<R: Rng + ?Sized>(rng: &mut R, weights: &[f64], total: f64) -> usize {
    let target = uniform(rng) * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if target < acc {
                return i;
            }
        }
    }
    last_positive
}
