//! Query-time lookup tables: squared partial distances per subquantizer, and
//! their saturating 8/16-bit integer form.
//!
//! Integer tables map a partial distance `p` of table `j` to
//! `floor((p - p_min(j)) / delta)`, capped at `q_max = 2^w - 1`. `delta` is
//! fixed per query from `[d_min, d_max]`, where `d_max` is the R-th best
//! distance among the first scanned candidates. Entries and sums reaching
//! `q_max` mean "not closer than `d_max`".

use std::io::Write;

use crate::error::{Error, Result};
use crate::quantizer::{Code, Codebook, PqSpec};
use crate::vectors::l2_sq;

/// Float lookup tables for one (residual) query.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTables {
    widths: Vec<u8>,
    offsets: Vec<usize>,
    entries: Vec<f32>,
    query: Vec<f32>,
}

impl DistanceTables {
    /// `D^j[i] = ||z^j - C^j[i]||^2` for every subquantizer `j` and centroid `i`.
    pub fn compute(query: &[f32], codebook: &Codebook) -> Result<Self> {
        let spec = codebook.spec();
        if query.len() != spec.total_dims() {
            return Err(Error::DimensionMismatch {
                expected: spec.total_dims(),
                actual: query.len(),
            });
        }
        if query.iter().any(|x| !x.is_finite()) {
            return Err(Error::input("query contains non-finite values"));
        }
        let m = spec.num_subquantizers();
        let mut offsets = Vec::with_capacity(m + 1);
        let mut entries = Vec::new();
        for j in 0..m {
            offsets.push(entries.len());
            let sub = &query[spec.dims(j)];
            let d = spec.dim_alloc()[j];
            entries.extend(codebook.sub_centroids(j).chunks_exact(d).map(|c| l2_sq(sub, c)));
        }
        offsets.push(entries.len());
        Ok(Self {
            widths: spec.widths().to_vec(),
            offsets,
            entries,
            query: query.to_vec(),
        })
    }

    /// Builds tables from raw entries; used by tests and benchmarks.
    pub fn from_entries(widths: Vec<u8>, tables: Vec<Vec<f32>>) -> Result<Self> {
        if widths.len() != tables.len() {
            return Err(Error::input("one table per subquantizer is required"));
        }
        let mut offsets = Vec::with_capacity(tables.len() + 1);
        let mut entries = Vec::new();
        for (j, t) in tables.iter().enumerate() {
            if t.len() != 1 << widths[j] {
                return Err(Error::input(format!("table {j} needs {} entries", 1 << widths[j])));
            }
            if t.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::input(format!("table {j} has negative or non-finite entries")));
            }
            offsets.push(entries.len());
            entries.extend_from_slice(t);
        }
        offsets.push(entries.len());
        Ok(Self { widths, offsets, entries, query: Vec::new() })
    }

    pub fn num_tables(&self) -> usize {
        self.widths.len()
    }

    pub fn widths(&self) -> &[u8] {
        &self.widths
    }

    pub fn table(&self, j: usize) -> &[f32] {
        &self.entries[self.offsets[j]..self.offsets[j + 1]]
    }

    /// The (residual) query the tables were computed from.
    pub fn query(&self) -> &[f32] {
        &self.query
    }

    pub fn p_min(&self, j: usize) -> f32 {
        self.table(j).iter().copied().fold(f32::INFINITY, f32::min)
    }

    /// `sum_j p_min(j)`, accumulated in the same order and precision as [`Self::adc`].
    pub fn d_min(&self) -> f32 {
        (0..self.num_tables()).fold(0f32, |acc, j| acc + self.p_min(j))
    }

    /// Sum of the table entries selected by `sub_indices`. The indices are
    /// not range-checked beyond slice bounds; use [`adc_scalar_float`] for
    /// untrusted codes.
    #[inline]
    pub fn adc(&self, sub_indices: &[u8]) -> f32 {
        let mut acc = 0f32;
        for (j, &i) in sub_indices.iter().enumerate() {
            acc += self.entries[self.offsets[j] + i as usize];
        }
        acc
    }

    pub(crate) fn flat(&self) -> (&[f32], &[usize]) {
        (&self.entries, &self.offsets)
    }

    /// CSV dump with one row per table entry: `sub,index,float,quantized`.
    pub fn write_csv<W: Write>(&self, w: W, quantized: Option<&QuantizedTables>) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["sub", "index", "float", "quantized"]).map_err(csv_err)?;
        for j in 0..self.num_tables() {
            for (i, p) in self.table(j).iter().enumerate() {
                let q = quantized.map(|q| q.entry(j, i).to_string()).unwrap_or_default();
                out.write_record([j.to_string(), i.to_string(), p.to_string(), q]).map_err(csv_err)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Float ADC of a validated code.
pub fn adc_scalar_float(code: &Code, tables: &DistanceTables) -> Result<f32> {
    check_code(code, tables.widths())?;
    Ok(tables.adc(code.sub_indices()))
}

fn check_code(code: &Code, widths: &[u8]) -> Result<()> {
    if code.0.len() != widths.len() {
        return Err(Error::corrupt(format!(
            "code has {} subcodes for {} tables",
            code.0.len(),
            widths.len()
        )));
    }
    if let Some(j) = (0..widths.len()).find(|&j| (code.0[j] as usize) >= 1 << widths[j]) {
        return Err(Error::corrupt(format!("subcode {} exceeds {}-bit table {j}", code.0[j], widths[j])));
    }
    Ok(())
}

/// `(d_min, d_max)` from the tables and the float distances of the first `t`
/// scanned candidates: `d_max` is the `r`-th smallest of them.
pub fn calibrate_bounds(tables: &DistanceTables, scan_prefix: &[f32], r: usize) -> Result<(f32, f32)> {
    if r == 0 {
        return Err(Error::Calibration("result count must be at least 1".into()));
    }
    if scan_prefix.len() < r {
        return Err(Error::Calibration(format!(
            "{} calibration distances cannot bound {r} results",
            scan_prefix.len()
        )));
    }
    Ok((tables.d_min(), rth_smallest(scan_prefix, r)))
}

pub(crate) fn rth_smallest(values: &[f32], r: usize) -> f32 {
    let mut v = values.to_vec();
    let (_, nth, _) = v.select_nth_unstable_by(r - 1, f32::total_cmp);
    *nth
}

/// Integer width of quantized table entries and of the accumulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistanceWidth {
    U8,
    U16,
}

impl DistanceWidth {
    pub fn bits(self) -> u32 {
        match self {
            DistanceWidth::U8 => 8,
            DistanceWidth::U16 => 16,
        }
    }

    pub fn q_max(self) -> u16 {
        match self {
            DistanceWidth::U8 => u8::MAX as u16,
            DistanceWidth::U16 => u16::MAX,
        }
    }

    /// Distance width the vector kernels use for `spec`: bytes for byte-packed
    /// codes, words for word-packed codes.
    pub fn for_spec(spec: &PqSpec) -> Self {
        match spec.word_width() {
            crate::quantizer::WordWidth::W8 => DistanceWidth::U8,
            crate::quantizer::WordWidth::W16 => DistanceWidth::U16,
        }
    }
}

impl std::str::FromStr for DistanceWidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "8" | "u8" => Ok(DistanceWidth::U8),
            "16" | "u16" => Ok(DistanceWidth::U16),
            _ => Err(Error::input(format!("distance width must be 8 or 16, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Entries {
    U8(Vec<u8>),
    U16(Vec<u16>),
}

/// Saturating integer lookup tables.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTables {
    width: DistanceWidth,
    widths: Vec<u8>,
    offsets: Vec<usize>,
    entries: Entries,
    delta: f64,
    d_min: f32,
    d_max: f32,
    p_min: Vec<f32>,
    /// Starting accumulator value, `floor((sum_j p_min(j) - d_min) / delta)`.
    /// Zero unless the caller's `d_min` is below this table set's own minimum,
    /// which happens when several inverted lists share one quantizer.
    bias: u16,
}

impl QuantizedTables {
    /// Quantizes `tables` onto `[d_min, d_max]` at the given width.
    pub fn quantize(tables: &DistanceTables, d_min: f32, d_max: f32, width: DistanceWidth) -> Result<Self> {
        if !d_min.is_finite() || !d_max.is_finite() {
            return Err(Error::Calibration(format!("non-finite bounds [{d_min}, {d_max}]")));
        }
        if d_max < d_min {
            return Err(Error::Calibration(format!("d_max {d_max} is below d_min {d_min}")));
        }
        let q_max = width.q_max();
        let delta = (d_max as f64 - d_min as f64) / q_max as f64;
        let quantize = |p: f64, floor: f64| -> u16 {
            let diff = p - floor;
            if delta == 0.0 {
                return if diff <= 0.0 { 0 } else { q_max };
            }
            let mut q = (diff / delta).floor();
            // Division rounding may overshoot a bin edge; never overestimate.
            if q > 0.0 && q * delta > diff {
                q -= 1.0;
            }
            q.clamp(0.0, q_max as f64) as u16
        };

        let p_min: Vec<f32> = (0..tables.num_tables()).map(|j| tables.p_min(j)).collect();
        let mut raw = Vec::with_capacity(tables.entries.len());
        for j in 0..tables.num_tables() {
            raw.extend(tables.table(j).iter().map(|&p| quantize(p as f64, p_min[j] as f64)));
        }
        let bias = quantize(tables.d_min() as f64, d_min as f64);
        let entries = match width {
            DistanceWidth::U8 => Entries::U8(raw.into_iter().map(|q| q as u8).collect()),
            DistanceWidth::U16 => Entries::U16(raw),
        };
        Ok(Self {
            width,
            widths: tables.widths.clone(),
            offsets: tables.offsets.clone(),
            entries,
            delta,
            d_min,
            d_max,
            p_min,
            bias,
        })
    }

    /// Builds integer tables directly, bypassing quantization; `delta` and
    /// `d_min` only affect [`Self::unquantize`].
    pub fn from_raw(width: DistanceWidth, widths: Vec<u8>, tables: Vec<Vec<u16>>, bias: u16) -> Result<Self> {
        let q_max = width.q_max();
        let mut offsets = vec![0];
        let mut raw = Vec::new();
        for (j, t) in tables.iter().enumerate() {
            if t.len() != 1 << widths[j] {
                return Err(Error::input(format!("table {j} needs {} entries", 1 << widths[j])));
            }
            if t.iter().any(|&q| q > q_max) || bias > q_max {
                return Err(Error::input(format!("entry above q_max {q_max}")));
            }
            raw.extend_from_slice(t);
            offsets.push(raw.len());
        }
        let entries = match width {
            DistanceWidth::U8 => Entries::U8(raw.into_iter().map(|q| q as u8).collect()),
            DistanceWidth::U16 => Entries::U16(raw),
        };
        Ok(Self {
            width,
            p_min: vec![0.0; widths.len()],
            widths,
            offsets,
            entries,
            delta: 1.0,
            d_min: 0.0,
            d_max: q_max as f32,
            bias,
        })
    }

    pub fn width(&self) -> DistanceWidth {
        self.width
    }

    pub fn widths(&self) -> &[u8] {
        &self.widths
    }

    pub fn num_tables(&self) -> usize {
        self.widths.len()
    }

    pub fn q_max(&self) -> u16 {
        self.width.q_max()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn d_min(&self) -> f32 {
        self.d_min
    }

    pub fn d_max(&self) -> f32 {
        self.d_max
    }

    pub fn p_min(&self) -> &[f32] {
        &self.p_min
    }

    pub fn bias(&self) -> u16 {
        self.bias
    }

    #[inline]
    pub fn entry(&self, j: usize, i: usize) -> u16 {
        let k = self.offsets[j] + i;
        match &self.entries {
            Entries::U8(e) => e[k] as u16,
            Entries::U16(e) => e[k],
        }
    }

    pub fn table_u16(&self, j: usize) -> Vec<u16> {
        (0..1usize << self.widths[j]).map(|i| self.entry(j, i)).collect()
    }

    pub(crate) fn entries(&self) -> &Entries {
        &self.entries
    }

    pub(crate) fn offset(&self, j: usize) -> usize {
        self.offsets[j]
    }

    /// `q_sum * delta + d_min`.
    pub fn unquantize(&self, q_sum: u32) -> f32 {
        (q_sum as f64 * self.delta + self.d_min as f64) as f32
    }

    pub fn is_saturated(&self, q_sum: u32) -> bool {
        q_sum >= self.q_max() as u32
    }
}

/// Quantized ADC: saturating sum at the table width, starting from the bias.
pub fn adc_scalar_quantized(code: &Code, qtables: &QuantizedTables) -> Result<u32> {
    check_code(code, qtables.widths())?;
    let idx = code.sub_indices();
    Ok(match qtables.entries() {
        Entries::U8(e) => idx
            .iter()
            .enumerate()
            .fold(qtables.bias as u8, |acc, (j, &i)| acc.saturating_add(e[qtables.offset(j) + i as usize]))
            as u32,
        Entries::U16(e) => idx
            .iter()
            .enumerate()
            .fold(qtables.bias, |acc, (j, &i)| acc.saturating_add(e[qtables.offset(j) + i as usize]))
            as u32,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::allocate_dims;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tables(rng: &mut ChaCha8Rng, widths: &[u8]) -> DistanceTables {
        let tables = widths
            .iter()
            .map(|&b| (0..1 << b).map(|_| rng.random_range(0.0f32..50.0)).collect())
            .collect();
        DistanceTables::from_entries(widths.to_vec(), tables).unwrap()
    }

    #[test]
    fn one_dim_table_by_hand() {
        let spec = PqSpec::new(1, vec![vec![8]], vec![1]).unwrap();
        let mut c = vec![100.0f32; 256];
        c[0] = 0.0;
        c[1] = 10.0;
        let cb = Codebook::from_parts(spec, vec![c]).unwrap();
        let t = DistanceTables::compute(&[4.0], &cb).unwrap();
        assert_eq!(&t.table(0)[..2], &[16.0, 36.0]);
        assert_eq!(t.query(), &[4.0]);
    }

    #[test]
    fn self_distance_is_zero_and_deterministic() {
        let spec = allocate_dims(8, &[vec![4, 4], vec![4, 4]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let per_sub = (0..4).map(|_| (0..32).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let cb = Codebook::from_parts(spec, per_sub).unwrap();
        let q: Vec<f32> = (0..4).flat_map(|j| cb.centroid(j, 5).to_vec()).collect();
        let a = DistanceTables::compute(&q, &cb).unwrap();
        let b = DistanceTables::compute(&q, &cb).unwrap();
        for j in 0..4 {
            assert_eq!(a.table(j)[5], 0.0);
        }
        assert_eq!(a, b);
        assert!(DistanceTables::compute(&q[..7], &cb).is_err());
    }

    /// ADC equals the reconstruction distance and the encoder's code is ADC-optimal.
    #[test]
    fn adc_matches_reconstruction() {
        let spec = PqSpec::new(6, vec![vec![4, 4]], vec![3, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let per_sub = (0..2).map(|_| (0..48).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
            let cb = Codebook::from_parts(spec.clone(), per_sub).unwrap();
            let z: Vec<f32> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
            let t = DistanceTables::compute(&z, &cb).unwrap();
            let best = adc_scalar_float(&cb.encode(&z).unwrap(), &t).unwrap();
            for a in 0..16u8 {
                for b in 0..16u8 {
                    let code = Code(vec![a, b]);
                    let adc = adc_scalar_float(&code, &t).unwrap();
                    let direct = l2_sq(&z, &cb.decode(&code).unwrap());
                    assert!((adc - direct).abs() <= 1e-5 * direct.max(1.0), "{adc} vs {direct}");
                    assert!(best <= adc);
                }
            }
        }
    }

    #[test]
    fn zero_entries_give_zero() {
        let t = DistanceTables::from_entries(vec![4, 4], vec![vec![0.0; 16], vec![0.0; 16]]).unwrap();
        assert_eq!(adc_scalar_float(&Code(vec![3, 9]), &t).unwrap(), 0.0);
        assert!(adc_scalar_float(&Code(vec![3, 16]), &t).is_err());
    }

    #[test]
    fn calibration_order_statistic() {
        let t = DistanceTables::from_entries(
            vec![4, 4, 4],
            vec![vec![1.0; 16], vec![2.0; 16], (0..16).map(|i| 3.0 + i as f32).collect()],
        )
        .unwrap();
        let (d_min, d_max) = calibrate_bounds(&t, &[9.0, 3.0, 7.0, 1.0, 5.0], 3).unwrap();
        assert_eq!((d_min, d_max), (6.0, 5.0));
        assert_eq!(calibrate_bounds(&t, &[4.5; 7], 7).unwrap().1, 4.5);
        assert!(matches!(calibrate_bounds(&t, &[1.0, 2.0], 3), Err(Error::Calibration(_))));
    }

    #[test]
    fn unit_delta_is_identity() {
        let t = DistanceTables::from_entries(vec![8], vec![(0..256).map(|i| i as f32).collect()]).unwrap();
        let q = QuantizedTables::quantize(&t, 0.0, 255.0, DistanceWidth::U8).unwrap();
        assert_eq!(q.delta(), 1.0);
        for i in 0..256 {
            assert_eq!(q.entry(0, i), i as u16);
        }
        assert_eq!(q.unquantize(0), 0.0);
        assert_eq!(q.unquantize(17), 17.0);
    }

    #[test]
    fn minimum_maps_to_zero_and_far_maps_to_qmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for width in [DistanceWidth::U8, DistanceWidth::U16] {
            for _ in 0..200 {
                let t = random_tables(&mut rng, &[6, 6, 4]);
                let d_min = t.d_min();
                let d_max = d_min + rng.random_range(0.1f32..40.0);
                let q = QuantizedTables::quantize(&t, d_min, d_max, width).unwrap();
                for j in 0..3 {
                    let pmin = t.p_min(j);
                    for (i, &p) in t.table(j).iter().enumerate() {
                        if p == pmin {
                            assert_eq!(q.entry(j, i), 0);
                        }
                        if p >= pmin + (d_max - d_min) {
                            assert_eq!(q.entry(j, i), q.q_max());
                        }
                    }
                }
                assert_eq!(q.bias(), 0);
                assert_eq!(q.unquantize(0), d_min);
            }
        }
    }

    #[test]
    fn degenerate_bounds() {
        let t = DistanceTables::from_entries(vec![4], vec![(0..16).map(|i| (i % 3) as f32).collect()]).unwrap();
        let q = QuantizedTables::quantize(&t, 0.0, 0.0, DistanceWidth::U8).unwrap();
        for i in 0..16 {
            assert_eq!(q.entry(0, i), if i % 3 == 0 { 0 } else { 255 });
        }
        assert!(QuantizedTables::quantize(&t, 1.0, 0.5, DistanceWidth::U8).is_err());
    }

    #[test]
    fn saturation_at_width() {
        let q = QuantizedTables::from_raw(DistanceWidth::U8, vec![4, 4], vec![vec![200; 16], vec![200; 16]], 0).unwrap();
        assert_eq!(adc_scalar_quantized(&Code(vec![1, 2]), &q).unwrap(), 255);
        let z = QuantizedTables::from_raw(DistanceWidth::U8, vec![4, 4], vec![vec![0; 16], vec![0; 16]], 0).unwrap();
        assert_eq!(adc_scalar_quantized(&Code(vec![1, 2]), &z).unwrap(), 0);
        let w = QuantizedTables::from_raw(DistanceWidth::U16, vec![4, 4], vec![vec![200; 16], vec![200; 16]], 0).unwrap();
        assert_eq!(adc_scalar_quantized(&Code(vec![1, 2]), &w).unwrap(), 400);
    }

    #[test]
    fn error_bound_against_float() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let widths = [4u8; 8];
            let t = random_tables(&mut rng, &widths);
            let d_min = t.d_min();
            let d_max = d_min + rng.random_range(1.0f32..100.0);
            let q = QuantizedTables::quantize(&t, d_min, d_max, DistanceWidth::U8).unwrap();
            let m = widths.len() as f64;
            for _ in 0..50 {
                let code = Code((0..8).map(|_| rng.random_range(0..16)).collect());
                let qs = adc_scalar_quantized(&code, &q).unwrap();
                if q.is_saturated(qs) {
                    continue;
                }
                let f = adc_scalar_float(&code, &t).unwrap() as f64;
                let gap = f - q.unquantize(qs) as f64;
                assert!(gap >= 0.0 && gap <= m * q.delta() + 1e-9, "gap {gap} delta {}", q.delta());
            }
        }
    }

    #[test]
    fn bias_shifts_by_reference_minimum() {
        let t = DistanceTables::from_entries(vec![4], vec![(0..16).map(|i| 10.0 + i as f32).collect()]).unwrap();
        let q = QuantizedTables::quantize(&t, 5.0, 5.0 + 255.0, DistanceWidth::U8).unwrap();
        assert_eq!(q.bias(), 5);
        assert_eq!(adc_scalar_quantized(&Code(vec![0]), &q).unwrap(), 5);
        assert_eq!(q.unquantize(5), 10.0);
    }

    proptest::proptest! {
        #[test]
        fn quantization_is_monotone(vals in proptest::collection::vec(0.0f32..1e4, 16), span in 0.01f32..1e4) {
            let t = DistanceTables::from_entries(vec![4], vec![vals.clone()]).unwrap();
            let q = QuantizedTables::quantize(&t, t.d_min(), t.d_min() + span, DistanceWidth::U16).unwrap();
            for a in 0..16 {
                for b in 0..16 {
                    if vals[a] <= vals[b] {
                        proptest::prop_assert!(q.entry(0, a) <= q.entry(0, b));
                    }
                }
            }
        }

        #[test]
        fn saturating_sum_is_order_independent(
            entries in proptest::collection::vec(0u16..=255, 6),
            perm in proptest::sample::subsequence((0..6usize).collect::<Vec<_>>(), 6).prop_shuffle(),
        ) {
            let widths = vec![4u8; 6];
            let tables: Vec<Vec<u16>> = entries.iter().map(|&e| vec![e; 16]).collect();
            let permuted: Vec<Vec<u16>> = perm.iter().map(|&k| tables[k].clone()).collect();
            let a = QuantizedTables::from_raw(DistanceWidth::U8, widths.clone(), tables, 0).unwrap();
            let b = QuantizedTables::from_raw(DistanceWidth::U8, widths, permuted, 0).unwrap();
            let code = Code(vec![0; 6]);
            proptest::prop_assert_eq!(adc_scalar_quantized(&code, &a).unwrap(), adc_scalar_quantized(&code, &b).unwrap());
        }
    }
}
