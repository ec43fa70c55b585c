//! Quantizes lookup tables onto 8-bit integers and compares exact and
//! quantized distances.

use pqscan::distance::{adc_scalar_quantized, calibrate_bounds, DistanceTables, DistanceWidth, QuantizedTables};
use pqscan::quantizer::{Code, Codebook, KMeansConfig, PqSpec};
use pqscan::vectors::VectorSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> pqscan::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dim = 32;
    let data = VectorSet::from_flat(dim, (0..dim * 4000).map(|_| rng.random_range(0.0..1.0)).collect())?;
    let spec = PqSpec::from_structure(dim, &"8x{4,4}".parse()?)?;
    let cb = Codebook::train(&data, &spec, &KMeansConfig::default())?;
    let codes: Vec<Code> = data.iter().map(|v| cb.encode(v).unwrap()).collect();

    let tables = DistanceTables::compute(data.row(0), &cb)?;
    let prefix: Vec<f32> = codes.iter().take(400).map(|c| tables.adc(&c.0)).collect();
    let (d_min, d_max) = calibrate_bounds(&tables, &prefix, 100)?;
    let q = QuantizedTables::quantize(&tables, d_min, d_max, DistanceWidth::U8)?;
    println!("bounds [{d_min:.3}, {d_max:.3}], bin size {:.5}", q.delta());

    let mut saturated = 0;
    for c in &codes[..8] {
        let exact = tables.adc(&c.0);
        let s = adc_scalar_quantized(c, &q)?;
        if q.is_saturated(s) {
            saturated += 1;
            println!("exact {exact:.3}  quantized saturated");
        } else {
            println!("exact {exact:.3}  quantized {s:>3} -> {:.3}", q.unquantize(s));
        }
    }
    println!("{saturated} of 8 beyond d_max");
    Ok(())
}
