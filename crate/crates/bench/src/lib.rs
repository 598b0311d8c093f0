//! Benchmark fixtures shared by the criterion benches.

use sdpi_core::rng::{random_channel, stream_rng};
use sdpi_core::Channel;

pub fn bsc(delta: f64) -> Channel {
    Channel::from_rows(vec![vec![1.0 - delta, delta], vec![delta, 1.0 - delta]]).unwrap()
}

/// Seeded random channel of the given shape.
pub fn random(inputs: usize, outputs: usize, seed: u64) -> Channel {
    random_channel(&mut stream_rng(seed, 0), inputs, outputs)
}
