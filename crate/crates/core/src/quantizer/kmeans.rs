//! Lloyd's k-means with k-means++ seeding, shared by the coarse quantizer and
//! every product subquantizer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::vectors::{nearest, VectorSet};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub max_iters: usize,
    /// Stop once an iteration improves distortion by less than this fraction.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_iters: 25,
            tolerance: 1e-4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeans {
    /// `k` rows of centroids.
    pub centroids: VectorSet,
    pub assignments: Vec<usize>,
    /// Total squared error after the seeding assignment and after each iteration.
    pub distortion: Vec<f64>,
}

pub fn kmeans(data: &VectorSet, k: usize, cfg: &KMeansConfig) -> Result<KMeans> {
    let n = data.len();
    if k == 0 {
        return Err(Error::Training("k must be positive".into()));
    }
    if n < k {
        return Err(Error::Training(format!("{n} samples are not enough for {k} centroids")));
    }
    data.ensure_finite()?;
    let dim = data.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut centroids = seed_plus_plus(data, k, &mut rng);
    let (mut assignments, mut point_err) = assign(data, &centroids, dim);
    let mut distortion = vec![total(&point_err)];

    for _ in 0..cfg.max_iters {
        update(data, &mut centroids, &assignments, &point_err, k);
        let (a, e) = assign(data, &centroids, dim);
        assignments = a;
        point_err = e;
        let prev = *distortion.last().unwrap();
        let cur = total(&point_err);
        distortion.push(cur);
        if cur == 0.0 || prev - cur < cfg.tolerance * prev {
            break;
        }
    }

    Ok(KMeans {
        centroids: VectorSet::from_flat(dim, centroids)?,
        assignments,
        distortion,
    })
}

fn total(err: &[f32]) -> f64 {
    err.iter().map(|&e| e as f64).sum()
}

/// D²-weighted seeding. Falls back to a uniform draw once every remaining
/// point coincides with a chosen centroid.
fn seed_plus_plus(data: &VectorSet, k: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let n = data.len();
    let dim = data.dim();
    let mut centroids = Vec::with_capacity(k * dim);
    centroids.extend_from_slice(data.row(rng.random_range(0..n)));
    let mut best: Vec<f32> = data
        .iter()
        .map(|v| crate::vectors::l2_sq(v, &centroids[..dim]))
        .collect();

    while centroids.len() < k * dim {
        let sum: f64 = best.iter().map(|&d| d as f64).sum();
        let pick = if sum > 0.0 {
            let mut target = rng.random::<f64>() * sum;
            let mut chosen = n - 1;
            for (i, &d) in best.iter().enumerate() {
                target -= d as f64;
                if target < 0.0 && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            // Rounding can exhaust `target` past the last positive weight.
            if best[chosen] == 0.0 {
                chosen = best.iter().rposition(|&d| d > 0.0).unwrap();
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let start = centroids.len();
        centroids.extend_from_slice(data.row(pick));
        let c = &centroids[start..];
        best.par_iter_mut().zip(data.as_flat().par_chunks_exact(dim)).for_each(|(b, v)| {
            let d = crate::vectors::l2_sq(v, c);
            if d < *b {
                *b = d;
            }
        });
    }
    centroids
}

fn assign(data: &VectorSet, centroids: &[f32], dim: usize) -> (Vec<usize>, Vec<f32>) {
    data.as_flat()
        .par_chunks_exact(dim)
        .map(|v| nearest(v, centroids, dim))
        .unzip()
}

/// Moves every centroid to the mean of its points. An empty cluster takes
/// over the worst-fit point of the cluster with the highest distortion.
fn update(data: &VectorSet, centroids: &mut [f32], assignments: &[usize], err: &[f32], k: usize) {
    let dim = data.dim();
    let mut sums = vec![0f64; k * dim];
    let mut counts = vec![0usize; k];
    let mut cluster_err = vec![0f64; k];
    for (i, v) in data.iter().enumerate() {
        let c = assignments[i];
        counts[c] += 1;
        cluster_err[c] += err[i] as f64;
        for (s, &x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(v) {
            *s += x as f64;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            let inv = 1.0 / counts[c] as f64;
            for (dst, &s) in centroids[c * dim..(c + 1) * dim].iter_mut().zip(&sums[c * dim..]) {
                *dst = (s * inv) as f32;
            }
        }
    }

    let mut taken = vec![false; data.len()];
    let empties: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
    for empty in empties {
        let donor = (0..k)
            .filter(|&c| counts[c] > 1)
            .max_by(|&a, &b| cluster_err[a].total_cmp(&cluster_err[b]).then(b.cmp(&a)));
        let Some(donor) = donor else { break };
        let far = (0..data.len())
            .filter(|&i| assignments[i] == donor && !taken[i])
            .max_by(|&a, &b| err[a].total_cmp(&err[b]).then(b.cmp(&a)));
        let Some(far) = far else { break };
        taken[far] = true;
        counts[donor] -= 1;
        cluster_err[donor] -= err[far] as f64;
        centroids[empty * dim..(empty + 1) * dim].copy_from_slice(data.row(far));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn set(dim: usize, v: &[f32]) -> VectorSet {
        VectorSet::from_flat(dim, v.to_vec()).unwrap()
    }

    fn sorted_rows(s: &VectorSet) -> Vec<Vec<f32>> {
        let mut rows: Vec<Vec<f32>> = s.iter().map(|r| r.to_vec()).collect();
        rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rows
    }

    #[test]
    fn two_means_on_four_points() {
        let km = kmeans(&set(1, &[0.0, 0.0, 10.0, 10.0]), 2, &KMeansConfig::default()).unwrap();
        assert_eq!(sorted_rows(&km.centroids), vec![vec![0.0], vec![10.0]]);
        assert_eq!(*km.distortion.last().unwrap(), 0.0);
    }

    #[test]
    fn k_equals_n_recovers_points() {
        let pts: Vec<f32> = (0..16).flat_map(|i| [i as f32, (i * 7 % 5) as f32]).collect();
        let data = set(2, &pts);
        let km = kmeans(&data, 16, &KMeansConfig::default()).unwrap();
        assert_eq!(sorted_rows(&km.centroids), sorted_rows(&data));
    }

    #[test]
    fn constant_column_stays_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<f32> = (0..200).flat_map(|_| [rng.random::<f32>(), 4.25, rng.random()]).collect();
        let km = kmeans(&set(3, &pts), 8, &KMeansConfig::default()).unwrap();
        assert!(km.centroids.iter().all(|c| c[1] == 4.25));
    }

    #[test]
    fn distortion_monotone_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<f32> = (0..3000).map(|_| rng.random::<f32>() * 100.0).collect();
        let data = set(3, &pts);
        let cfg = KMeansConfig { seed: 5, ..Default::default() };
        let a = kmeans(&data, 32, &cfg).unwrap();
        for w in a.distortion.windows(2) {
            assert!(w[1] <= w[0], "{:?}", a.distortion);
        }
        let b = kmeans(&data, 32, &cfg).unwrap();
        assert_eq!(a.centroids, b.centroids);
    }

    #[test]
    fn duplicate_points_fill_empty_clusters() {
        // Only 3 distinct values for 4 centroids; no centroid is left stranded.
        let data = set(1, &[1.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 3.0]);
        let km = kmeans(&data, 4, &KMeansConfig::default()).unwrap();
        assert_eq!(km.centroids.len(), 4);
        assert_eq!(*km.distortion.last().unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            kmeans(&set(1, &[1.0, 2.0]), 4, &KMeansConfig::default()),
            Err(Error::Training(_))
        ));
        assert!(matches!(
            kmeans(&set(1, &[1.0, f32::NAN, 3.0]), 2, &KMeansConfig::default()),
            Err(Error::Input(_))
        ));
    }
}
