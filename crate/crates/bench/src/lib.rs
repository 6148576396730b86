//! Shared fixture builders for the benchmark targets.

use ndarray::Array2;
use npts_core::dataset::Dataset;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

/// Synthetic dataset with a smooth signal and Gaussian noise: `p` responses
/// driven by `k` covariates on the standardized scale.
pub fn synthetic_dataset(n: usize, p: usize, k: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((n, k));
    let mut y = Array2::zeros((n, p));
    for i in 0..n {
        for j in 0..k {
            x[(i, j)] = rng.random_range(-2.0..2.0);
        }
        let signal: f64 = (0..k).map(|j| x[(i, j)]).sum::<f64>() / k as f64;
        for j in 0..p {
            let noise: f64 = StandardNormal.sample(&mut rng);
            y[(i, j)] = if j % 2 == 0 { signal } else { -signal } + 0.3 * noise;
        }
    }
    Dataset::from_standardized(y, x).expect("finite synthetic data")
}
