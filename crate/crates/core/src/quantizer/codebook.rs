use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rayon::prelude::*;

use super::kmeans::{kmeans, KMeansConfig};
use super::spec::PqSpec;
use crate::error::{Error, Result};
use crate::vectors::{l2_sq, VectorSet};

pub const CODEBOOK_MAGIC: &[u8; 4] = b"QADC";
pub const CODEBOOK_VERSION: u32 = 1;

/// One subcode index per subquantizer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Code(pub Vec<u8>);

impl Code {
    pub fn sub_indices(&self) -> &[u8] {
        &self.0
    }

    pub fn validate(&self, spec: &PqSpec) -> Result<()> {
        if self.0.len() != spec.num_subquantizers() {
            return Err(Error::corrupt(format!(
                "code has {} subcodes, spec has {} subquantizers",
                self.0.len(),
                spec.num_subquantizers()
            )));
        }
        for (j, &i) in self.0.iter().enumerate() {
            if (i as usize) >= spec.num_centroids(j) {
                return Err(Error::corrupt(format!(
                    "subcode {i} out of range for {}-bit subquantizer {j}",
                    spec.bits(j)
                )));
            }
        }
        Ok(())
    }
}

/// Per-subquantizer centroid matrices together with the spec they realize.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    spec: PqSpec,
    /// `per_sub[j]` is `2^bits_j` rows of `dim_alloc[j]` floats, row-major.
    per_sub: Vec<Vec<f32>>,
}

impl Codebook {
    pub fn from_parts(spec: PqSpec, per_sub: Vec<Vec<f32>>) -> Result<Self> {
        if per_sub.len() != spec.num_subquantizers() {
            return Err(Error::corrupt("centroid matrix count does not match the spec"));
        }
        for (j, c) in per_sub.iter().enumerate() {
            if c.len() != spec.num_centroids(j) * spec.dim_alloc()[j] {
                return Err(Error::corrupt(format!("subquantizer {j} has a mis-sized codebook")));
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::corrupt(format!("subquantizer {j} has non-finite centroids")));
            }
        }
        Ok(Self { spec, per_sub })
    }

    /// Trains every subquantizer independently on its slice of `vectors`.
    pub fn train(vectors: &VectorSet, spec: &PqSpec, cfg: &KMeansConfig) -> Result<Self> {
        if vectors.dim() != spec.total_dims() {
            return Err(Error::DimensionMismatch {
                expected: spec.total_dims(),
                actual: vectors.dim(),
            });
        }
        vectors.ensure_finite()?;
        let per_sub = (0..spec.num_subquantizers())
            .into_par_iter()
            .map(|j| {
                let slice = vectors.columns(spec.dims(j));
                let sub_cfg = KMeansConfig {
                    seed: cfg.seed.wrapping_add((j as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)),
                    ..cfg.clone()
                };
                kmeans(&slice, spec.num_centroids(j), &sub_cfg)
                    .map(|km| km.centroids.as_flat().to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(spec.clone(), per_sub)
    }

    pub fn spec(&self) -> &PqSpec {
        &self.spec
    }

    pub fn centroid(&self, sub: usize, index: usize) -> &[f32] {
        let d = self.spec.dim_alloc()[sub];
        &self.per_sub[sub][index * d..(index + 1) * d]
    }

    pub fn sub_centroids(&self, sub: usize) -> &[f32] {
        &self.per_sub[sub]
    }

    pub fn encode(&self, v: &[f32]) -> Result<Code> {
        self.check_dim(v)?;
        Ok(Code(
            (0..self.spec.num_subquantizers())
                .map(|j| {
                    crate::vectors::nearest(&v[self.spec.dims(j)], &self.per_sub[j], self.spec.dim_alloc()[j]).0
                        as u8
                })
                .collect(),
        ))
    }

    pub fn decode(&self, code: &Code) -> Result<Vec<f32>> {
        code.validate(&self.spec)?;
        let mut out = Vec::with_capacity(self.spec.total_dims());
        for (j, &i) in code.0.iter().enumerate() {
            out.extend_from_slice(self.centroid(j, i as usize));
        }
        Ok(out)
    }

    /// Squared reconstruction error of `v` under `code`.
    pub fn distortion(&self, v: &[f32], code: &Code) -> Result<f32> {
        self.check_dim(v)?;
        Ok(l2_sq(v, &self.decode(code)?))
    }

    fn check_dim(&self, v: &[f32]) -> Result<()> {
        if v.len() != self.spec.total_dims() {
            return Err(Error::DimensionMismatch {
                expected: self.spec.total_dims(),
                actual: v.len(),
            });
        }
        Ok(())
    }

    /// Writes the versioned container:
    ///
    /// ```text
    /// "QADC" | version u32 | total_dims u32 | num_groups u32
    /// | per group: len u32, widths u8*len
    /// | m u32 | dim_alloc u32*m
    /// | per subquantizer: 2^bits * dims f32, row-major
    /// ```
    /// All integers and floats are little-endian.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(CODEBOOK_MAGIC)?;
        w.write_u32::<LittleEndian>(CODEBOOK_VERSION)?;
        write_spec(w, &self.spec)?;
        for c in &self.per_sub {
            for &x in c {
                w.write_f32::<LittleEndian>(x)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CODEBOOK_MAGIC {
            return Err(Error::corrupt("not a codebook container (bad magic)"));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != CODEBOOK_VERSION {
            return Err(Error::corrupt(format!("unsupported codebook version {version}")));
        }
        let spec = read_spec(r)?;
        let mut per_sub = Vec::with_capacity(spec.num_subquantizers());
        for j in 0..spec.num_subquantizers() {
            let mut c = vec![0f32; spec.num_centroids(j) * spec.dim_alloc()[j]];
            r.read_f32_into::<LittleEndian>(&mut c)?;
            per_sub.push(c);
        }
        Self::from_parts(spec, per_sub)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }
}

pub(crate) fn write_spec<W: Write>(w: &mut W, spec: &PqSpec) -> Result<()> {
    w.write_u32::<LittleEndian>(spec.total_dims() as u32)?;
    w.write_u32::<LittleEndian>(spec.num_groups() as u32)?;
    for g in spec.groups() {
        w.write_u32::<LittleEndian>(g.len() as u32)?;
        w.write_all(g)?;
    }
    w.write_u32::<LittleEndian>(spec.num_subquantizers() as u32)?;
    for &d in spec.dim_alloc() {
        w.write_u32::<LittleEndian>(d as u32)?;
    }
    Ok(())
}

const MAX_HEADER_COUNT: usize = 1 << 20;

fn read_count<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let n = r.read_u32::<LittleEndian>()? as usize;
    if n > MAX_HEADER_COUNT {
        return Err(Error::corrupt(format!("implausible {what} count {n}")));
    }
    Ok(n)
}

pub(crate) fn read_spec<R: Read>(r: &mut R) -> Result<PqSpec> {
    let total_dims = read_count(r, "dimension")?;
    let num_groups = read_count(r, "group")?;
    let mut groups = Vec::with_capacity(num_groups);
    for _ in 0..num_groups {
        let len = read_count(r, "group width")?;
        let mut g = vec![0u8; len];
        r.read_exact(&mut g)?;
        groups.push(g);
    }
    let m = read_count(r, "subquantizer")?;
    let mut dim_alloc = Vec::with_capacity(m);
    for _ in 0..m {
        dim_alloc.push(r.read_u32::<LittleEndian>()? as usize);
    }
    PqSpec::new(total_dims, groups, dim_alloc).map_err(|e| Error::corrupt(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::spec::allocate_dims;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny_spec() -> PqSpec {
        // Two 4-bit subquantizers (k=16) over 2+2 dims.
        PqSpec::new(4, vec![vec![4, 4]], vec![2, 2]).unwrap()
    }

    fn random_codebook(spec: &PqSpec, seed: u64) -> Codebook {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let per_sub = (0..spec.num_subquantizers())
            .map(|j| (0..spec.num_centroids(j) * spec.dim_alloc()[j]).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        Codebook::from_parts(spec.clone(), per_sub).unwrap()
    }

    #[test]
    fn centroid_concatenation_encodes_exactly() {
        let spec = allocate_dims(8, &[vec![4, 4], vec![4, 4]]).unwrap();
        let cb = random_codebook(&spec, 1);
        let v: Vec<f32> = (0..4).flat_map(|j| cb.centroid(j, 3).to_vec()).collect();
        let code = cb.encode(&v).unwrap();
        assert_eq!(code.0, vec![3; 4]);
        assert_eq!(cb.decode(&code).unwrap(), v);
    }

    #[test]
    fn zero_code_decodes_to_first_centroids() {
        let spec = tiny_spec();
        let cb = random_codebook(&spec, 2);
        let v = cb.decode(&Code(vec![0, 0])).unwrap();
        assert_eq!(&v[..2], cb.centroid(0, 0));
        assert_eq!(&v[2..], cb.centroid(1, 0));
    }

    #[test]
    fn tie_goes_to_lower_index() {
        let spec = PqSpec::new(1, vec![vec![8]], vec![1]).unwrap();
        let mut c: Vec<f32> = (0..256).map(|i| 100.0 + i as f32).collect();
        c[1] = 1.0;
        c[2] = 3.0;
        let cb = Codebook::from_parts(spec, vec![c]).unwrap();
        assert_eq!(cb.encode(&[2.0]).unwrap().0, vec![1]);
    }

    /// Exhaustive nearest-centroid per slice on a 2-subquantizer, k=16 spec,
    /// plus optimality over all 256 joint codes.
    #[test]
    fn encode_is_optimal_over_all_codes() {
        let spec = tiny_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..20 {
            let cb = random_codebook(&spec, seed);
            let v: Vec<f32> = (0..4).map(|_| rng.random_range(-6.0..6.0)).collect();
            let code = cb.encode(&v).unwrap();
            for j in 0..2 {
                let brute = (0..16)
                    .min_by(|&a, &b| {
                        let da = l2_sq(&v[spec.dims(j)], cb.centroid(j, a));
                        let db = l2_sq(&v[spec.dims(j)], cb.centroid(j, b));
                        da.partial_cmp(&db).unwrap().then(a.cmp(&b))
                    })
                    .unwrap();
                assert_eq!(code.0[j] as usize, brute);
            }
            let best = cb.distortion(&v, &code).unwrap();
            for a in 0..16u8 {
                for b in 0..16u8 {
                    assert!(best <= cb.distortion(&v, &Code(vec![a, b])).unwrap() + 1e-5);
                }
            }
        }
    }

    #[test]
    fn decode_rejects_out_of_range() {
        let spec = PqSpec::new(8, vec![vec![6, 5, 5]], vec![3, 3, 2]).unwrap();
        let cb = random_codebook(&spec, 4);
        assert!(matches!(cb.decode(&Code(vec![0, 32, 0])), Err(Error::Corruption(_))));
        assert!(matches!(cb.decode(&Code(vec![0, 0])), Err(Error::Corruption(_))));
        assert!(matches!(cb.encode(&[0.0; 7]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn train_is_seed_deterministic() {
        let spec = allocate_dims(8, &[vec![4, 4], vec![4, 4]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data: Vec<f32> = (0..8 * 500).map(|_| rng.random()).collect();
        let data = VectorSet::from_flat(8, data).unwrap();
        let cfg = KMeansConfig { seed: 42, ..Default::default() };
        let a = Codebook::train(&data, &spec, &cfg).unwrap();
        let b = Codebook::train(&data, &spec, &cfg).unwrap();
        assert_eq!(a, b);
        let c = Codebook::train(&data, &spec, &KMeansConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn train_needs_enough_samples() {
        let spec = PqSpec::new(2, vec![vec![8]], vec![2]).unwrap();
        let data = VectorSet::from_flat(2, vec![0.5; 2 * 100]).unwrap();
        assert!(matches!(
            Codebook::train(&data, &spec, &KMeansConfig::default()),
            Err(Error::Training(_))
        ));
    }

    #[test]
    fn container_round_trip_and_magic() {
        let spec = allocate_dims(12, &[vec![6, 6, 4]]).unwrap();
        let cb = random_codebook(&spec, 7);
        let bytes = cb.to_bytes();
        assert_eq!(&bytes[..4], b"QADC");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        let back = Codebook::read_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, cb);

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Codebook::read_from(&mut bad.as_slice()), Err(Error::Corruption(_))));
        assert!(Codebook::read_from(&mut &bytes[..bytes.len() - 1]).is_err());
    }
}
