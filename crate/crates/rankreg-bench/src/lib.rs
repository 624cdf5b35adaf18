//! Shared fixtures for the benchmarks.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Deterministic score vector with a sprinkling of exact ties.
pub fn scores(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            if i % 7 == 0 {
                f64::from(rng.random_range(-20i32..20)) * 0.25
            } else {
                rng.random_range(-5.0..5.0)
            }
        })
        .collect()
}

/// Labels with roughly one positive per `ratio` samples, at least one of
/// each class.
pub fn labels(n: usize, ratio: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xbeef);
    let mut out: Vec<u8> = (0..n)
        .map(|_| u8::from(rng.random_range(0..ratio) == 0))
        .collect();
    out[0] = 1;
    out[n - 1] = 0;
    out
}
