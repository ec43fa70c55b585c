#![allow(dead_code)]

use pqscan::vectors::VectorSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Gaussian clusters around uniform centers in `[0, 10)^dim`. Each cluster
/// spreads along `LATENT` random directions with decaying scales, plus a small
/// isotropic term. Returns the database and `queries` held-out points from the
/// same mixture.
pub fn clustered(n: usize, queries: usize, dim: usize, clusters: usize, seed: u64) -> (VectorSet, VectorSet) {
    const LATENT: usize = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0f32, 1.0).unwrap();
    let centers: Vec<Vec<f32>> = (0..clusters)
        .map(|_| (0..dim).map(|_| rng.random_range(0.0..10.0)).collect())
        .collect();
    let bases: Vec<Vec<Vec<f32>>> = (0..clusters)
        .map(|_| {
            (0..LATENT)
                .map(|k| {
                    let scale = 1.0 / (k as f32 + 1.0).sqrt();
                    (0..dim).map(|_| scale * noise.sample(&mut rng)).collect()
                })
                .collect()
        })
        .collect();
    let mut draw = |count: usize| {
        let mut set = VectorSet::new(dim);
        for _ in 0..count {
            let c = rng.random_range(0..clusters);
            let mut v: Vec<f32> = centers[c].iter().map(|&x| x + 0.1 * noise.sample(&mut rng)).collect();
            for dir in &bases[c] {
                let t = noise.sample(&mut rng);
                for (x, d) in v.iter_mut().zip(dir) {
                    *x += t * d;
                }
            }
            set.push(&v).unwrap();
        }
        set
    };
    let base = draw(n);
    let q = draw(queries);
    (base, q)
}

pub fn sq_dist(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Exact nearest neighbors by brute-force L2, ties by id.
pub fn exact_knn(base: &VectorSet, queries: &VectorSet, k: usize) -> Vec<Vec<i32>> {
    queries
        .iter()
        .map(|q| {
            let mut d: Vec<(f32, usize)> = base.iter().enumerate().map(|(i, v)| (sq_dist(q, v), i)).collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().take(k).map(|(_, i)| i as i32).collect()
        })
        .collect()
}
