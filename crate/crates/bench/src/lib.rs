//! Shared helpers for the gain benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fpf_core::{MixtureDensity, ParticleEnsemble};

/// Deterministic standard-normal ensemble wrapped in a mixture density.
pub fn normal_mixture(seed: u64, n: usize, epsilon: f64) -> MixtureDensity {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions: Vec<f64> = (0..n)
        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    MixtureDensity::new(ParticleEnsemble::new(positions).unwrap(), epsilon).unwrap()
}

/// Uniform evaluation grid.
pub fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}
