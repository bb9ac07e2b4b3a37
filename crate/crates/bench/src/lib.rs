//! Seeded inputs shared by the benchmarks.

use fadtk_core::{AudioClip, GaussianStats};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn noise_clip(len: usize, seed: u64) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    AudioClip::new((0..len).map(|_| rng.random_range(-0.5..0.5)).collect(), 16_000).expect("finite samples")
}

/// Random full-rank Gaussian of dimension `d`.
pub fn random_stats(d: usize, seed: u64) -> GaussianStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(d, 2 * d, |_, _| rng.random_range(-1.0..1.0));
    let cov = &a * a.transpose() / (2 * d) as f64;
    let mean = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
    GaussianStats::new(mean, cov, 1000, "bench").expect("symmetric covariance")
}
