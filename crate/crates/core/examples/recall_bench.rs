//! Recall and latency against the number of probed cells, as CSV.

use pqscan::eval::{evaluate_recall, mean_time_ms, result_ids, search_batch};
use pqscan::index::{BuildConfig, IvfIndex, SearchParams};
use pqscan::vectors::{l2_sq, VectorSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> pqscan::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let dim = 32;
    let centers: Vec<f32> = (0..dim * 64).map(|_| rng.random_range(0.0..10.0)).collect();
    let mut draw = |n: usize| -> pqscan::Result<VectorSet> {
        let mut set = VectorSet::new(dim);
        for _ in 0..n {
            let c = rng.random_range(0..64) * dim;
            let v: Vec<f32> = centers[c..c + dim].iter().map(|x| x + rng.random_range(-1.5..1.5)).collect();
            set.push(&v)?;
        }
        Ok(set)
    };
    let base = draw(30_000)?;
    let queries = draw(200)?;
    let gt: Vec<Vec<i32>> = queries
        .iter()
        .map(|q| {
            let best = base.iter().enumerate().min_by(|a, b| l2_sq(q, a.1).total_cmp(&l2_sq(q, b.1))).unwrap().0;
            vec![best as i32]
        })
        .collect();

    let index = IvfIndex::build(&base, &BuildConfig::new(256, "8x{4,4}".parse()?).seed(6))?;
    println!("probes,r_at_1,r_at_100,mean_ms");
    for probes in [1, 2, 4, 8, 16, 32] {
        let params = SearchParams { probes, ..Default::default() };
        let kernel = index.kernel_for(&params, &pqscan::scan::Capabilities::detect());
        let out = search_batch(&index, &queries, &params, &kernel, 1)?;
        let r = evaluate_recall(&result_ids(&out), &gt, &[1, 100])?;
        println!("{probes},{:.3},{:.3},{:.3}", r[0], r[1], mean_time_ms(&out));
    }
    Ok(())
}
