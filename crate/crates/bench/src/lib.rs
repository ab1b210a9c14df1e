//! Synthetic inputs for the benchmarks.

use ldao_core::{Dataset, JointPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// `n` rows with `d` features drawn from `blobs` Gaussian clusters whose
/// sizes shrink geometrically, so the last cluster is rare.
pub fn imbalanced(n: usize, d: usize, blobs: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..blobs)
        .map(|_| (0..=d).map(|_| rng.random_range(-10.0..10.0)).collect())
        .collect();
    let weights: Vec<f64> = (0..blobs).map(|k| 0.5f64.powi(k as i32)).collect();
    let total: f64 = weights.iter().sum();
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let mut u = rng.random::<f64>() * total;
        let mut k = 0;
        while k + 1 < blobs && u >= weights[k] {
            u -= weights[k];
            k += 1;
        }
        for (j, c) in centers[k].iter().enumerate() {
            let e: f64 = StandardNormal.sample(&mut rng);
            if j < d {
                x.push(c + e);
            } else {
                y.push(c + e);
            }
        }
    }
    let names = (0..d).map(|j| format!("x{j}")).collect();
    Dataset::new(x, d, y, names, "y").expect("generated data is valid")
}

/// `n` standard-normal points in `dim` dimensions.
pub fn cloud(n: usize, dim: usize, seed: u64) -> Vec<JointPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| JointPoint::new((0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()))
        .collect()
}
