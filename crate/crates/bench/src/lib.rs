//! Shared fixtures for benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use warnsim_core::geom::Point;

/// `n` uniformly placed points in `[0, w) × [0, h)`.
pub fn random_points(n: usize, w: f64, h: f64, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Point::new(rng.random_range(0.0..w), rng.random_range(0.0..h))).collect()
}
