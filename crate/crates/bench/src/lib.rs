//! Seeded inputs shared by the kernel benchmarks.

use acpd_core::PointSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` points drawn uniformly from [-1, 1]^d.
pub fn uniform_points(seed: u64, d: usize, n: usize) -> PointSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PointSet::new(d, (0..d * n).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("valid shape")
}
