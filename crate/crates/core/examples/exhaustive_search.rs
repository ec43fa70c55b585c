//! Exhaustive search of a flat database with the quantized and float scans.

use std::time::Instant;

use pqscan::index::{IvfIndex, SearchParams};
use pqscan::quantizer::{Codebook, KMeansConfig, PqSpec};
use pqscan::scan::{Capabilities, KernelFamily};
use pqscan::vectors::VectorSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> pqscan::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let dim = 64;
    let base = VectorSet::from_flat(dim, (0..dim * 100_000).map(|_| rng.random_range(0.0..1.0)).collect())?;
    let spec = PqSpec::from_structure(dim, &"16x{4,4}".parse()?)?;
    let train = base.select(&(0..10_000).collect::<Vec<_>>());
    let index = IvfIndex::build_flat(&base, Codebook::train(&train, &spec, &KMeansConfig::default())?)?;

    let query = base.row(123).to_vec();
    let quantized = SearchParams::default();
    let float = SearchParams { kernel: Some(KernelFamily::ScalarFloat), ..SearchParams::default() };
    println!("kernel: {}", index.kernel_for(&quantized, &Capabilities::detect()).family);

    for (name, p) in [("quantized", &quantized), ("float", &float)] {
        let t = Instant::now();
        let res = index.search_exhaustive(&query, p)?;
        println!("{name:<9} {:>7.2} ms, top ids {:?}", t.elapsed().as_secs_f64() * 1e3, &res[..5].iter().map(|n| n.id).collect::<Vec<_>>());
    }
    Ok(())
}
