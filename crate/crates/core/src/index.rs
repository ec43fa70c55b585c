//! Inverted-file index over product-quantized residuals, and the flat
//! (exhaustive) database as its single-cell special case.
//!
//! A query probes the `a` cells whose coarse centroids are nearest, builds
//! lookup tables per cell from its residual, calibrates a quantizer once from
//! the first `t` codes in probe order and scans every probed list with it.
//! All cells share the bin size and the lowest cell minimum as origin; a cell
//! whose own minimum lies higher starts its accumulator at the difference.

use std::collections::HashMap;
use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use log::{debug, info};
use ordered_float::OrderedFloat;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::distance::{rth_smallest, DistanceTables, DistanceWidth, QuantizedTables};
use crate::error::{Error, Result};
use crate::layout::{read_database, write_database, PackedList, PackingScheme};
use crate::quantizer::{kmeans, write_spec, CodeStructure, Codebook, KMeansConfig, PqSpec};
use crate::scan::{select_kernel, Capabilities, CandidateHeap, FloatScanner, KernelChoice, KernelFamily, QuantizedScanner};
use crate::vectors::{l2_sq, VectorSet};

pub const INDEX_MAGIC: &[u8; 4] = b"QIVF";
pub const INDEX_VERSION: u32 = 1;
pub const DEFAULT_CELLS: usize = 4096;

/// Stable fingerprint of a spec, stored with encoded data.
pub fn spec_hash(spec: &PqSpec) -> u64 {
    let mut bytes = Vec::new();
    write_spec(&mut bytes, spec).expect("writing to a Vec cannot fail");
    let digest = Sha256::digest(&bytes);
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

#[derive(Debug, Clone)]
pub struct BuildConfig {
    pub cells: usize,
    pub structure: CodeStructure,
    pub kmeans: KMeansConfig,
    /// Coarse k-means sample size per cell.
    pub coarse_sample_per_cell: usize,
    /// PQ training sample size per centroid of the widest subquantizer.
    pub pq_sample_per_centroid: usize,
}

impl BuildConfig {
    pub fn new(cells: usize, structure: CodeStructure) -> Self {
        Self {
            cells,
            structure,
            kmeans: KMeansConfig::default(),
            coarse_sample_per_cell: 256,
            pq_sample_per_centroid: 256,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.kmeans.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchParams {
    pub probes: usize,
    pub results: usize,
    pub calibration: usize,
    pub rerank: bool,
    pub kernel: Option<KernelFamily>,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self { probes: 1, results: 100, calibration: 400, rerank: false, kernel: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: u32,
    /// Unquantized distance; infinite when the quantized sum saturated.
    pub distance: f32,
}

#[derive(Debug, Clone)]
pub struct IvfIndex {
    codebook: Codebook,
    scheme: PackingScheme,
    centroids: VectorSet,
    residual: bool,
    ids: Vec<Vec<u32>>,
    lists: Vec<PackedList>,
}

fn seeded_sample(n: usize, k: usize, seed: u64) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    let mut idx = sample(&mut ChaCha8Rng::seed_from_u64(seed), n, k).into_vec();
    idx.sort_unstable();
    idx
}

impl IvfIndex {
    /// Trains the coarse quantizer and a product quantizer on residuals, then
    /// encodes every vector into the list of its nearest centroid.
    pub fn build(vectors: &VectorSet, cfg: &BuildConfig) -> Result<Self> {
        let n = vectors.len();
        let k = cfg.cells;
        if k == 0 {
            return Err(Error::Build("the index needs at least one cell".into()));
        }
        if n < k {
            return Err(Error::Build(format!("{n} vectors cannot populate {k} cells")));
        }
        vectors.ensure_finite()?;
        let d = vectors.dim();
        let spec = PqSpec::from_structure(d, &cfg.structure)?;

        let coarse_idx = seeded_sample(n, k.saturating_mul(cfg.coarse_sample_per_cell), cfg.kmeans.seed);
        info!("coarse k-means: {k} cells on {} vectors", coarse_idx.len());
        let centroids = kmeans(&vectors.select(&coarse_idx), k, &cfg.kmeans)?.centroids;
        let assign: Vec<usize> = vectors
            .as_flat()
            .par_chunks_exact(d)
            .map(|v| crate::vectors::nearest(v, centroids.as_flat(), d).0)
            .collect();
        let mut residuals = Vec::with_capacity(n * d);
        for (v, &c) in vectors.iter().zip(&assign) {
            residuals.extend(v.iter().zip(centroids.row(c)).map(|(x, y)| x - y));
        }
        let residuals = VectorSet::from_flat(d, residuals)?;

        let max_k = 1usize << spec.widths().iter().max().unwrap();
        let pq_idx = seeded_sample(n, max_k.saturating_mul(cfg.pq_sample_per_centroid), cfg.kmeans.seed.wrapping_add(1));
        info!("training {} on {} residuals", spec.structure(), pq_idx.len());
        let codebook = Codebook::train(&residuals.select(&pq_idx), &spec, &cfg.kmeans)?;
        Self::from_assignment(codebook, centroids, &residuals, &assign, true)
    }

    /// Flat database: vectors encoded directly, one list, no residuals.
    pub fn build_flat(vectors: &VectorSet, codebook: Codebook) -> Result<Self> {
        let d = codebook.spec().total_dims();
        if vectors.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: vectors.dim() });
        }
        vectors.ensure_finite()?;
        let centroids = VectorSet::from_flat(d, vec![0.0; d])?;
        Self::from_assignment(codebook, centroids, vectors, &vec![0; vectors.len()], false)
    }

    fn from_assignment(codebook: Codebook, centroids: VectorSet, encoded: &VectorSet, assign: &[usize], residual: bool) -> Result<Self> {
        let spec = codebook.spec();
        let scheme = PackingScheme::default_for(spec)?;
        let m = spec.num_subquantizers();
        let codes: Vec<u8> = encoded
            .as_flat()
            .par_chunks_exact(encoded.dim())
            .map(|v| codebook.encode(v).map(|c| c.0))
            .collect::<Result<Vec<_>>>()?
            .concat();
        let k = centroids.len();
        let mut ids = vec![Vec::new(); k];
        let mut flat = vec![Vec::new(); k];
        for (i, &c) in assign.iter().enumerate() {
            ids[c].push(i as u32);
            flat[c].extend_from_slice(&codes[i * m..(i + 1) * m]);
        }
        let lists = flat
            .par_iter()
            .map(|f| PackedList::from_flat_codes(f, &scheme))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { codebook, scheme, centroids, residual, ids, lists })
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn spec(&self) -> &PqSpec {
        self.codebook.spec()
    }

    pub fn scheme(&self) -> &PackingScheme {
        &self.scheme
    }

    pub fn centroids(&self) -> &VectorSet {
        &self.centroids
    }

    pub fn num_cells(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.centroids.dim()
    }

    pub fn len(&self) -> usize {
        self.ids.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_residual(&self) -> bool {
        self.residual
    }

    pub fn list_ids(&self, cell: usize) -> &[u32] {
        &self.ids[cell]
    }

    pub fn list(&self, cell: usize) -> &PackedList {
        &self.lists[cell]
    }

    fn check_query(&self, query: &[f32]) -> Result<()> {
        if query.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: query.len() });
        }
        if query.iter().any(|x| !x.is_finite()) {
            return Err(Error::input("query contains non-finite values"));
        }
        Ok(())
    }

    /// The `a` cells nearest to `query`, nearest first, ties by cell index.
    pub fn probe_order(&self, query: &[f32], a: usize) -> Result<Vec<usize>> {
        self.check_query(query)?;
        let mut d: Vec<(OrderedFloat<f32>, usize)> = self
            .centroids
            .iter()
            .enumerate()
            .map(|(i, c)| (OrderedFloat(l2_sq(query, c)), i))
            .collect();
        let a = a.min(d.len());
        if a < d.len() {
            d.select_nth_unstable(a);
            d.truncate(a);
        }
        d.sort_unstable();
        Ok(d.into_iter().map(|(_, i)| i).collect())
    }

    /// Ids of every database vector in the `a` probed cells, in scan order.
    pub fn candidates(&self, query: &[f32], a: usize) -> Result<Vec<u32>> {
        Ok(self.probe_order(query, a)?.into_iter().flat_map(|c| self.ids[c].iter().copied()).collect())
    }

    /// Lookup tables of `cell` for `query`.
    pub fn cell_tables(&self, query: &[f32], cell: usize) -> Result<DistanceTables> {
        if self.residual {
            let z: Vec<f32> = query.iter().zip(self.centroids.row(cell)).map(|(x, c)| x - c).collect();
            DistanceTables::compute(&z, &self.codebook)
        } else {
            DistanceTables::compute(query, &self.codebook)
        }
    }

    fn check_params(&self, p: &SearchParams) -> Result<()> {
        if p.probes == 0 || p.probes > self.num_cells() {
            return Err(Error::Config(format!("probes must be in 1..={}, got {}", self.num_cells(), p.probes)));
        }
        if p.results == 0 {
            return Err(Error::Config("at least one result must be requested".into()));
        }
        if p.calibration < p.results {
            return Err(Error::Config(format!(
                "calibration prefix {} is shorter than the result count {}",
                p.calibration, p.results
            )));
        }
        Ok(())
    }

    /// Kernel the search would use on a host with `caps`.
    pub fn kernel_for(&self, params: &SearchParams, caps: &Capabilities) -> KernelChoice {
        select_kernel(self.spec(), &self.scheme, caps, params.kernel)
    }

    pub fn search(&self, query: &[f32], params: &SearchParams) -> Result<Vec<Neighbor>> {
        let caps = Capabilities::detect();
        self.search_with(query, params, &caps, &self.kernel_for(params, &caps))
    }

    /// Search of the whole database in one pass; flat databases only.
    pub fn search_exhaustive(&self, query: &[f32], params: &SearchParams) -> Result<Vec<Neighbor>> {
        if self.residual {
            return Err(Error::Config("exhaustive search needs a flat database".into()));
        }
        self.search(query, &SearchParams { probes: 1, ..params.clone() })
    }

    pub fn search_with(&self, query: &[f32], params: &SearchParams, caps: &Capabilities, kernel: &KernelChoice) -> Result<Vec<Neighbor>> {
        self.check_params(params)?;
        let cells = self.probe_order(query, params.probes)?;
        let tables = cells
            .iter()
            .map(|&c| self.cell_tables(query, c))
            .collect::<Result<Vec<_>>>()?;

        let mut out = if kernel.family == KernelFamily::ScalarFloat {
            self.scan_float(&cells, &tables, params.results)?
        } else {
            self.scan_quantized(&cells, &tables, params, caps, kernel)?
        };

        if params.rerank {
            self.rerank(&cells, &tables, &mut out);
        }
        Ok(out)
    }

    fn scan_float(&self, cells: &[usize], tables: &[DistanceTables], r: usize) -> Result<Vec<Neighbor>> {
        let mut heap = CandidateHeap::new(r);
        for (&c, t) in cells.iter().zip(tables) {
            FloatScanner::new(t, &self.scheme)?.scan_list(&self.lists[c], &self.ids[c], &mut heap)?;
        }
        Ok(heap
            .into_sorted()
            .into_iter()
            .map(|(d, id)| Neighbor { id, distance: d.0 })
            .collect())
    }

    /// Quantization bounds from the float distances of the first
    /// `params.calibration` codes in probe order: the lowest table minimum of
    /// the probed cells, and the `R`-th smallest distance (`R` capped at the
    /// number of codes seen). `None` when the probed cells are empty.
    pub fn calibrate(&self, cells: &[usize], tables: &[DistanceTables], params: &SearchParams) -> Option<(f32, f32)> {
        let mut prefix = Vec::with_capacity(params.calibration);
        'fill: for (&c, t) in cells.iter().zip(tables) {
            let list = &self.lists[c];
            for i in 0..list.len() {
                if prefix.len() == params.calibration {
                    break 'fill;
                }
                prefix.push(t.adc(&list.code(&self.scheme, i).0));
            }
        }
        if prefix.is_empty() {
            return None;
        }
        let r = params.results.min(prefix.len());
        let d_min = tables.iter().map(|t| t.d_min()).fold(f32::INFINITY, f32::min);
        let d_max = rth_smallest(&prefix, r);
        debug!("calibrated [{d_min}, {d_max}] from {} codes", prefix.len());
        Some((d_min, d_max))
    }

    fn scan_quantized(
        &self,
        cells: &[usize],
        tables: &[DistanceTables],
        params: &SearchParams,
        caps: &Capabilities,
        kernel: &KernelChoice,
    ) -> Result<Vec<Neighbor>> {
        let Some((d_min, d_max)) = self.calibrate(cells, tables, params) else {
            return Ok(Vec::new());
        };
        let width = kernel.family.distance_width().unwrap_or_else(|| DistanceWidth::for_spec(self.spec()));

        let mut heap = CandidateHeap::new(params.results);
        let mut reference = None;
        for (&c, t) in cells.iter().zip(tables) {
            let q = QuantizedTables::quantize(t, d_min, d_max, width)?;
            QuantizedScanner::for_choice(&q, &self.scheme, kernel, caps)?.scan_list(&self.lists[c], &self.ids[c], &mut heap)?;
            reference.get_or_insert(q);
        }
        let q = reference.unwrap();
        Ok(heap
            .into_sorted()
            .into_iter()
            .map(|(s, id)| Neighbor {
                id,
                distance: if q.is_saturated(s) { f32::INFINITY } else { q.unquantize(s) },
            })
            .collect())
    }

    /// Replaces distances by float ADC and re-sorts.
    fn rerank(&self, cells: &[usize], tables: &[DistanceTables], out: &mut [Neighbor]) {
        let wanted: HashMap<u32, usize> = out.iter().enumerate().map(|(k, n)| (n.id, k)).collect();
        for (&c, t) in cells.iter().zip(tables) {
            for (pos, id) in self.ids[c].iter().enumerate() {
                if let Some(&k) = wanted.get(id) {
                    out[k].distance = t.adc(&self.lists[c].code(&self.scheme, pos).0);
                }
            }
        }
        out.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.id.cmp(&b.id)));
    }

    /// Writes the index container:
    ///
    /// ```text
    /// "QIVF" | version u32 | codebook length u64 | codebook container
    /// | residual u8 | cells u32 | dim u32 | centroids f32*cells*dim
    /// | per cell: id count u32, ids u32*count | encoded database container
    /// ```
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(INDEX_MAGIC)?;
        w.write_u32::<LittleEndian>(INDEX_VERSION)?;
        let cb = self.codebook.to_bytes();
        w.write_u64::<LittleEndian>(cb.len() as u64)?;
        w.write_all(&cb)?;
        w.write_u8(self.residual as u8)?;
        w.write_u32::<LittleEndian>(self.num_cells() as u32)?;
        w.write_u32::<LittleEndian>(self.dim() as u32)?;
        for &x in self.centroids.as_flat() {
            w.write_f32::<LittleEndian>(x)?;
        }
        for ids in &self.ids {
            w.write_u32::<LittleEndian>(ids.len() as u32)?;
            for &id in ids {
                w.write_u32::<LittleEndian>(id)?;
            }
        }
        write_database(w, spec_hash(self.spec()), &self.scheme, &self.lists)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != INDEX_MAGIC {
            return Err(Error::corrupt("not an index file (bad magic)"));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != INDEX_VERSION {
            return Err(Error::corrupt(format!("unsupported index version {version}")));
        }
        let cb_len = r.read_u64::<LittleEndian>()?;
        let mut cb = Vec::new();
        r.take(cb_len).read_to_end(&mut cb)?;
        if cb.len() as u64 != cb_len {
            return Err(Error::corrupt("truncated codebook"));
        }
        let codebook = Codebook::read_from(&mut cb.as_slice())?;
        let residual = r.read_u8()? != 0;
        let k = r.read_u32::<LittleEndian>()? as usize;
        let d = r.read_u32::<LittleEndian>()? as usize;
        if d != codebook.spec().total_dims() || k == 0 || k > 1 << 24 {
            return Err(Error::corrupt("coarse quantizer does not match the codebook"));
        }
        let mut centroids = vec![0f32; k * d];
        r.read_f32_into::<LittleEndian>(&mut centroids)?;
        let mut ids = Vec::with_capacity(k);
        for _ in 0..k {
            let n = r.read_u32::<LittleEndian>()? as usize;
            let mut list = vec![0u32; n];
            r.read_u32_into::<LittleEndian>(&mut list)?;
            ids.push(list);
        }
        let db = read_database(r)?;
        if db.spec_hash != spec_hash(codebook.spec()) || !db.scheme.matches(codebook.spec()) {
            return Err(Error::SpecMismatch("encoded database was built for a different spec".into()));
        }
        if db.lists.len() != k || db.lists.iter().zip(&ids).any(|(l, i)| l.len() != i.len()) {
            return Err(Error::corrupt("list sizes disagree with the id lists"));
        }
        Ok(Self {
            codebook,
            scheme: db.scheme,
            centroids: VectorSet::from_flat(d, centroids)?,
            residual,
            ids,
            lists: db.lists,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::adc_scalar_float;
    use rand::Rng;

    fn clustered(n: usize, centers: &[[f32; 8]], seed: u64) -> (VectorSet, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = VectorSet::new(8);
        let mut label = Vec::new();
        for i in 0..n {
            let c = i % centers.len();
            let row: Vec<f32> = centers[c].iter().map(|x| x + rng.random_range(-0.5..0.5)).collect();
            v.push(&row).unwrap();
            label.push(c);
        }
        (v, label)
    }

    fn centers() -> Vec<[f32; 8]> {
        (0..4).map(|c| std::array::from_fn(|j| if j == 2 * c { 100.0 } else { 0.0 })).collect()
    }

    fn cfg(cells: usize) -> BuildConfig {
        BuildConfig::new(cells, "4x{4,4}".parse().unwrap()).seed(3)
    }

    #[test]
    fn cells_follow_known_clusters() {
        let (v, label) = clustered(400, &centers(), 1);
        let idx = IvfIndex::build(&v, &cfg(4)).unwrap();
        let mut seen = vec![false; 400];
        for c in 0..4 {
            let ids = idx.list_ids(c);
            assert_eq!(ids.len(), 100);
            assert!(ids.iter().all(|&i| label[i as usize] == label[ids[0] as usize]));
            for &i in ids {
                assert!(!seen[i as usize]);
                seen[i as usize] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn single_cell_holds_everything() {
        let (v, _) = clustered(300, &centers(), 2);
        let idx = IvfIndex::build(&v, &BuildConfig { coarse_sample_per_cell: usize::MAX, ..cfg(1) }).unwrap();
        assert_eq!(idx.list_ids(0), (0..300).collect::<Vec<u32>>());
        let mean: Vec<f32> = (0..8).map(|j| v.iter().map(|r| r[j] as f64).sum::<f64>() as f32 / 300.0).collect();
        for (a, b) in idx.centroids().row(0).iter().zip(&mean) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn too_few_vectors() {
        let (v, _) = clustered(3, &centers(), 3);
        assert!(matches!(IvfIndex::build(&v, &cfg(4)), Err(Error::Build(_))));
    }

    #[test]
    fn deterministic_file() {
        let (v, _) = clustered(500, &centers(), 4);
        let a = IvfIndex::build(&v, &cfg(4)).unwrap().to_bytes();
        let b = IvfIndex::build(&v, &cfg(4)).unwrap().to_bytes();
        assert_eq!(a, b);
        assert_eq!(&a[..4], b"QIVF");
    }

    #[test]
    fn file_round_trip_preserves_results() {
        let (v, _) = clustered(600, &centers(), 5);
        let idx = IvfIndex::build(&v, &cfg(4)).unwrap();
        let back = IvfIndex::read_from(&mut idx.to_bytes().as_slice()).unwrap();
        let p = SearchParams { probes: 2, results: 10, ..Default::default() };
        for q in v.iter().take(10) {
            assert_eq!(idx.search(q, &p).unwrap(), back.search(q, &p).unwrap());
        }
    }

    #[test]
    fn float_kernel_with_all_probes_is_brute_force() {
        let (v, _) = clustered(500, &centers(), 6);
        let idx = IvfIndex::build(&v, &cfg(4)).unwrap();
        let p = SearchParams { probes: 4, results: 50, kernel: Some(KernelFamily::ScalarFloat), ..Default::default() };
        let q = [50.0, 1.0, 0.0, 3.0, 2.0, 1.0, 0.0, 0.0];
        let mut oracle = Vec::new();
        for c in 0..4 {
            let t = idx.cell_tables(&q, c).unwrap();
            for (pos, &id) in idx.list_ids(c).iter().enumerate() {
                oracle.push((adc_scalar_float(&idx.list(c).code(idx.scheme(), pos), &t).unwrap(), id));
            }
        }
        oracle.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let got: Vec<(f32, u32)> = idx.search(&q, &p).unwrap().iter().map(|n| (n.distance, n.id)).collect();
        assert_eq!(got, oracle[..50].to_vec());
    }

    #[test]
    fn flat_search_edges() {
        let (v, _) = clustered(40, &centers(), 7);
        let spec = PqSpec::from_structure(8, &"4x{4,4}".parse().unwrap()).unwrap();
        let cb = Codebook::train(&v, &spec, &KMeansConfig::default()).unwrap();
        let idx = IvfIndex::build_flat(&v, cb.clone()).unwrap();
        let p = SearchParams { results: 100, calibration: 400, ..Default::default() };
        let res = idx.search_exhaustive(v.row(0), &p).unwrap();
        let mut ids: Vec<u32> = res.iter().map(|n| n.id).collect();
        ids.sort();
        assert_eq!(ids, (0..40).collect::<Vec<_>>());
        assert!(res.windows(2).all(|w| w[0].distance <= w[1].distance));

        let empty = IvfIndex::build_flat(&VectorSet::new(8), cb).unwrap();
        assert!(empty.search_exhaustive(v.row(0), &p).unwrap().is_empty());
    }

    #[test]
    fn rerank_gives_float_distances() {
        let (v, _) = clustered(300, &centers(), 8);
        let idx = IvfIndex::build(&v, &cfg(2)).unwrap();
        let q = v.row(17);
        let p = SearchParams { probes: 2, results: 20, rerank: true, ..Default::default() };
        let res = idx.search(q, &p).unwrap();
        let cells = idx.probe_order(q, 2).unwrap();
        for n in &res {
            let c = *cells.iter().find(|&&c| idx.list_ids(c).contains(&n.id)).unwrap();
            let pos = idx.list_ids(c).iter().position(|&i| i == n.id).unwrap();
            let t = idx.cell_tables(q, c).unwrap();
            assert_eq!(n.distance, t.adc(&idx.list(c).code(idx.scheme(), pos).0));
        }
        assert!(res.windows(2).all(|w| w[0].distance <= w[1].distance));
    }

    #[test]
    fn parameter_and_query_checks() {
        let (v, _) = clustered(100, &centers(), 9);
        let idx = IvfIndex::build(&v, &cfg(2)).unwrap();
        let q = v.row(0);
        for p in [
            SearchParams { probes: 0, ..Default::default() },
            SearchParams { probes: 3, ..Default::default() },
            SearchParams { results: 500, calibration: 400, ..Default::default() },
        ] {
            assert!(matches!(idx.search(q, &p), Err(Error::Config(_))));
        }
        assert!(matches!(
            idx.search(&q[..4], &SearchParams::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
