//! Trains a product quantizer and checks that it survives a save/load cycle.

use pqscan::quantizer::{Codebook, KMeansConfig, PqSpec};
use pqscan::vectors::VectorSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> pqscan::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dim = 32;
    let data: Vec<f32> = (0..dim * 5000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let data = VectorSet::from_flat(dim, data)?;

    let spec = PqSpec::from_structure(dim, &"8x{4,4}".parse()?)?;
    let cb = Codebook::train(&data, &spec, &KMeansConfig { seed: 7, ..Default::default() })?;

    let mean: f32 = data.iter().map(|v| cb.distortion(v, &cb.encode(v).unwrap()).unwrap()).sum::<f32>() / data.len() as f32;
    println!("{spec}: mean squared distortion {mean:.4}");

    let bytes = cb.to_bytes();
    let back = Codebook::read_from(&mut bytes.as_slice())?;
    assert_eq!(back.to_bytes(), bytes);
    println!("codebook container: {} bytes", bytes.len());
    Ok(())
}
