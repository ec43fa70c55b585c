//! Inverted file index over residual codes, probing more cells each round.

use pqscan::index::{BuildConfig, IvfIndex, SearchParams};
use pqscan::vectors::VectorSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> pqscan::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dim = 32;
    let centers: Vec<f32> = (0..dim * 40).map(|_| rng.random_range(0.0..10.0)).collect();
    let mut base = VectorSet::new(dim);
    for _ in 0..20_000 {
        let c = rng.random_range(0..40) * dim;
        let v: Vec<f32> = centers[c..c + dim].iter().map(|x| x + rng.random_range(-1.0..1.0)).collect();
        base.push(&v)?;
    }
    let index = IvfIndex::build(&base, &BuildConfig::new(128, "6x{6,5,5}".parse()?).seed(5))?;
    println!("{} vectors in {} cells", index.len(), index.num_cells());

    let query = base.row(42);
    for probes in [1, 4, 16] {
        let res = index.search(query, &SearchParams { probes, results: 10, calibration: 100, ..Default::default() })?;
        let found = res.iter().position(|n| n.id == 42);
        println!(
            "probes {probes:>2}: {} candidates, vector 42 at rank {found:?}",
            index.candidates(query, probes)?.len()
        );
    }
    Ok(())
}
