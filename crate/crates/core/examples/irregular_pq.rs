//! Same 64-bit budget, different subquantizer widths.

use pqscan::quantizer::{Codebook, KMeansConfig, PqSpec};
use pqscan::vectors::VectorSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> pqscan::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let dim = 48;
    let data: Vec<f32> = (0..dim * 8000)
        .map(|i| rng.random_range(-1.0..1.0) / (1.0 + (i % dim) as f32 / 8.0))
        .collect();
    let data = VectorSet::from_flat(dim, data)?;

    for s in ["16x{4,4}", "12x{6,6,4}", "12x{6,5,5}", "12x{5,5,5}"] {
        let spec = PqSpec::from_structure(dim, &s.parse()?)?;
        let cb = Codebook::train(&data, &spec, &KMeansConfig::default())?;
        let err: f32 = data.iter().map(|v| cb.distortion(v, &cb.encode(v).unwrap()).unwrap()).sum::<f32>();
        println!(
            "{s:<12} {} bits, dims per subquantizer {:?}, distortion {:.3}",
            spec.code_bits(),
            spec.dim_alloc(),
            err / data.len() as f32
        );
    }
    Ok(())
}
