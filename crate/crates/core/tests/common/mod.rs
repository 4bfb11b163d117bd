#![allow(dead_code)]

use bestsubset::Dataset;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Random logistic instance: Gaussian features, a sparse ground-truth
/// coefficient vector and Bernoulli labels, min-max scaled.
pub fn random_instance(m: usize, n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let x = DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng));
        let truth: Vec<f64> = (0..n)
            .map(|j| if j % 3 == 0 { rng.random_range(-2.0..2.0) } else { 0.0 })
            .collect();
        let y: Vec<f64> = (0..m)
            .map(|i| {
                let z: f64 = (0..n).map(|j| x[(i, j)] * truth[j]).sum::<f64>() - 0.3;
                let p = 1.0 / (1.0 + (-z).exp());
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        let pos = y.iter().filter(|&&v| v > 0.0).count();
        if pos < 3 || pos + 3 > m {
            continue;
        }
        let d = Dataset::from_matrix(x, y).unwrap();
        return bestsubset::data::minmax_scale(&d);
    }
}

pub fn random_costs(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC057);
    (0..n).map(|_| rng.random_range(1..=10) as f64).collect()
}
