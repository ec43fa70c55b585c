//! Differential check of every vector kernel against the scalar scan.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{scan_block_scalar, Capabilities, CandidateHeap, Isa, KernelFamily, QuantizedScanner};
use crate::distance::{DistanceWidth, QuantizedTables};
use crate::error::Result;
use crate::layout::{transpose_block, PackingScheme};
use crate::quantizer::{allocate_dims, Code, CodeStructure, PqSpec};

/// The spec families the kernels are checked on, at 64-bit code size.
pub const SPEC_FAMILIES: [&str; 6] = ["16x{4,4}", "12x{6,6,4}", "12x{6,5,5}", "12x{5,5,5}", "8x{8,8}", "8x{8}"];

#[derive(Debug, Clone)]
pub struct DifferentialCase {
    pub structure: String,
    pub family: KernelFamily,
    pub isa: Isa,
    pub trials: usize,
    pub mismatches: usize,
    pub first_mismatch: Option<String>,
}

impl fmt::Display for DifferentialCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<12} {:<15} {:<11} {} trials, {} mismatches",
            self.structure, self.family, self.isa, self.trials, self.mismatches
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct SelftestReport {
    pub cases: Vec<DifferentialCase>,
    /// Spec families with no vector kernel on this host.
    pub scalar_only: Vec<String>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.mismatches == 0)
    }
}

/// Runs `trials` random (block, tables, heap) states through every available
/// vector kernel variant of every spec family.
pub fn run_differential(caps: &Capabilities, trials: usize, seed: u64) -> Result<SelftestReport> {
    let mut report = SelftestReport::default();
    for (k, s) in SPEC_FAMILIES.iter().enumerate() {
        let structure: CodeStructure = s.parse()?;
        let pattern = structure.pattern().to_vec();
        let spec = tiny_spec(&pattern, structure.num_groups())?;
        let scheme = PackingScheme::default_for(&spec)?;
        let mut any = false;
        for family in KernelFamily::VECTOR.into_iter().filter(|f| f.supports(&scheme)) {
            for isa in family.available_variants(caps) {
                any = true;
                let seed = seed ^ ((k as u64) << 32) ^ ((isa as u64) << 48);
                report.cases.push(differential(&pattern, structure.num_groups(), family, isa, caps, trials, seed)?);
            }
        }
        if !any {
            report.scalar_only.push(s.to_string());
        }
    }
    Ok(report)
}

fn tiny_spec(pattern: &[u8], groups: usize) -> Result<PqSpec> {
    allocate_dims(pattern.len() * groups, &vec![pattern.to_vec(); groups])
}

/// Differential trials for one kernel variant; group counts vary from 1 to
/// twice `base_groups` so every row-loop tail is exercised.
pub fn differential(
    pattern: &[u8],
    base_groups: usize,
    family: KernelFamily,
    isa: Isa,
    caps: &Capabilities,
    trials: usize,
    seed: u64,
) -> Result<DifferentialCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = family.distance_width().unwrap_or(DistanceWidth::U16);
    let q_max = width.q_max();
    let max_groups = 2 * base_groups;
    let setups: Vec<(PqSpec, PackingScheme)> = (1..=max_groups)
        .map(|g| {
            let spec = tiny_spec(pattern, g)?;
            let scheme = PackingScheme::default_for(&spec)?;
            Ok((spec, scheme))
        })
        .collect::<Result<_>>()?;

    let mut case = DifferentialCase {
        structure: format!("{{{}}}", pattern.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(",")),
        family,
        isa,
        trials,
        mismatches: 0,
        first_mismatch: None,
    };
    for trial in 0..trials {
        let (spec, scheme) = &setups[rng.random_range(0..max_groups)];
        let m = spec.num_subquantizers();
        let hi = match rng.random_range(0..4) {
            0 => q_max,
            1 => 3,
            _ => (2 * q_max as usize / m).clamp(1, q_max as usize) as u16,
        };
        let tables = spec
            .widths()
            .iter()
            .map(|&b| (0..1 << b).map(|_| rng.random_range(0..=hi)).collect())
            .collect();
        let bias = if rng.random_bool(0.8) { 0 } else { rng.random_range(0..=q_max / 2) };
        let q = QuantizedTables::from_raw(width, spec.widths().to_vec(), tables, bias)?;

        let bl = scheme.block_len();
        let n = if rng.random_bool(0.5) { bl } else { rng.random_range(1..=bl) };
        let codes: Vec<Code> = (0..n)
            .map(|_| Code(spec.widths().iter().map(|&b| rng.random_range(0..1u16 << b) as u8).collect()))
            .collect();
        let block = transpose_block(&codes, scheme)?;
        let ids: Vec<u32> = (0..bl).map(|_| rng.random_range(0..4 * bl as u32)).collect();

        let cap = rng.random_range(1..=2 * bl);
        let mut heap = CandidateHeap::new(cap);
        for _ in 0..rng.random_range(0..=cap + 4) {
            heap.push(rng.random_range(0..=q_max as u32), rng.random_range(0..4 * bl as u32));
        }
        let mut reference = heap.clone();
        scan_block_scalar(block.as_ref(), scheme, &q, &ids, &mut reference)?;
        let scanner = QuantizedScanner::new(&q, scheme, family, isa, caps)?;
        scanner.scan_block(block.as_ref(), &ids, &mut heap)?;
        if heap.as_slice() != reference.as_slice() {
            case.mismatches += 1;
            if case.first_mismatch.is_none() {
                case.first_mismatch = Some(format!(
                    "trial {trial}: {} groups, occupancy {n}, capacity {cap}: got {:?}, expected {:?}",
                    scheme.num_groups(),
                    heap.sorted(),
                    reference.sorted()
                ));
            }
        }
    }
    Ok(case)
}
