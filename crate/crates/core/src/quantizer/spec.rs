//! Subquantizer structure: bit widths, grouping into packed words, and the
//! allocation of input dimensions to subquantizers.
//!
//! A structure is written `<m>x{<w>,...}`: `m` subquantizers whose widths
//! repeat the braced group pattern `m / g` times. `16x{4,4}` is eight
//! byte-packed groups of two 4-bit subquantizers, `12x{6,6,4}` is four
//! 16-bit groups.

use std::fmt;
use std::str::FromStr;

use log::warn;

use crate::error::{Error, Result};

/// Group patterns accepted by the packing layer, in `{a,b,..}` notation.
pub const SUPPORTED_FAMILIES: &str =
    "groups summing to 8 bits (e.g. {4,4}, {8}), to 16 bits (e.g. {6,6,4}, {6,5,5}, {8,8}), or the padded {5,5,5}";

/// Largest subquantizer width: lookups index at most 256-entry tables.
pub const MAX_SUB_BITS: u8 = 8;

/// Width of the machine word a group of subcodes is packed into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WordWidth {
    W8,
    W16,
}

impl WordWidth {
    pub fn bits(self) -> u32 {
        match self {
            WordWidth::W8 => 8,
            WordWidth::W16 => 16,
        }
    }

    pub fn bytes(self) -> usize {
        self.bits() as usize / 8
    }

    pub fn from_bits(bits: u32) -> Option<Self> {
        match bits {
            8 => Some(WordWidth::W8),
            16 => Some(WordWidth::W16),
            _ => None,
        }
    }
}

/// The `m x {pattern}` part of a spec, independent of the input dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CodeStructure {
    pattern: Vec<u8>,
    num_groups: usize,
}

impl CodeStructure {
    pub fn new(pattern: Vec<u8>, num_groups: usize) -> Result<Self> {
        if num_groups == 0 {
            return Err(Error::InvalidSpec("at least one group is required".into()));
        }
        word_width_of(&pattern)?;
        Ok(Self { pattern, num_groups })
    }

    pub fn pattern(&self) -> &[u8] {
        &self.pattern
    }

    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    pub fn num_subquantizers(&self) -> usize {
        self.pattern.len() * self.num_groups
    }

    pub fn groups(&self) -> Vec<Vec<u8>> {
        vec![self.pattern.clone(); self.num_groups]
    }

    pub fn code_bits(&self) -> usize {
        self.pattern.iter().map(|&b| b as usize).sum::<usize>() * self.num_groups
    }
}

impl fmt::Display for CodeStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{{", self.num_subquantizers())?;
        for (i, w) in self.pattern.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{w}")?;
        }
        f.write_str("}")
    }
}

impl FromStr for CodeStructure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidSpec(format!("cannot parse {s:?}; expected <m>x{{<w>(,<w>)*}}"));
        let (m, rest) = s.trim().split_once('x').ok_or_else(bad)?;
        let m: usize = m.trim().parse().map_err(|_| bad())?;
        let inner = rest
            .trim()
            .strip_prefix('{')
            .and_then(|r| r.strip_suffix('}'))
            .ok_or_else(bad)?;
        let pattern = inner
            .split(',')
            .map(|w| w.trim().parse::<u8>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        if pattern.is_empty() || m == 0 || m % pattern.len() != 0 {
            return Err(Error::InvalidSpec(format!(
                "{s:?}: subquantizer count {m} is not a positive multiple of the group size {}",
                pattern.len()
            )));
        }
        CodeStructure::new(pattern.clone(), m / pattern.len())
    }
}

/// Word width for a group, or an error naming the supported families.
fn word_width_of(group: &[u8]) -> Result<WordWidth> {
    if group.is_empty() {
        return Err(Error::InvalidSpec("empty subquantizer group".into()));
    }
    if let Some(&w) = group.iter().find(|&&w| w == 0 || w > MAX_SUB_BITS) {
        return Err(Error::InvalidSpec(format!(
            "subquantizer width {w} outside 1..={MAX_SUB_BITS}"
        )));
    }
    let sum: u32 = group.iter().map(|&w| w as u32).sum();
    match sum {
        8 => Ok(WordWidth::W8),
        16 => Ok(WordWidth::W16),
        15 if group == [5, 5, 5] => Ok(WordWidth::W16),
        _ => Err(Error::InvalidSpec(format!(
            "group {{{}}} packs {sum} bits; supported: {SUPPORTED_FAMILIES}",
            group.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(",")
        ))),
    }
}

/// Full quantizer structure: groups of bit widths plus the number of input
/// dimensions each subquantizer covers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PqSpec {
    total_dims: usize,
    groups: Vec<Vec<u8>>,
    dim_alloc: Vec<usize>,
    // derived
    widths: Vec<u8>,
    dim_offsets: Vec<usize>,
    word_width: WordWidth,
}

impl PqSpec {
    /// Builds a spec with an explicit dimension allocation.
    pub fn new(total_dims: usize, groups: Vec<Vec<u8>>, dim_alloc: Vec<usize>) -> Result<Self> {
        let first = groups
            .first()
            .ok_or_else(|| Error::InvalidSpec("at least one group is required".into()))?;
        let word_width = word_width_of(first)?;
        for g in &groups[1..] {
            word_width_of(g)?;
            if g != first {
                return Err(Error::InvalidSpec(
                    "all groups must share the same bit-width pattern".into(),
                ));
            }
        }
        let widths: Vec<u8> = groups.iter().flatten().copied().collect();
        if dim_alloc.len() != widths.len() {
            return Err(Error::InvalidSpec(format!(
                "dimension allocation has {} entries for {} subquantizers",
                dim_alloc.len(),
                widths.len()
            )));
        }
        if dim_alloc.iter().any(|&d| d == 0) {
            return Err(Error::InvalidSpec("every subquantizer needs at least one dimension".into()));
        }
        let sum: usize = dim_alloc.iter().sum();
        if sum != total_dims {
            return Err(Error::InvalidSpec(format!(
                "dimension allocation sums to {sum}, expected {total_dims}"
            )));
        }
        let dim_offsets = dim_alloc
            .iter()
            .scan(0, |acc, &d| {
                let off = *acc;
                *acc += d;
                Some(off)
            })
            .collect();
        Ok(Self {
            total_dims,
            groups,
            dim_alloc,
            widths,
            dim_offsets,
            word_width,
        })
    }

    /// Allocates dimensions for `structure` over `total_dims` inputs.
    pub fn from_structure(total_dims: usize, structure: &CodeStructure) -> Result<Self> {
        allocate_dims(total_dims, &structure.groups())
    }

    pub fn total_dims(&self) -> usize {
        self.total_dims
    }

    pub fn groups(&self) -> &[Vec<u8>] {
        &self.groups
    }

    pub fn dim_alloc(&self) -> &[usize] {
        &self.dim_alloc
    }

    /// Bit width of every subquantizer, in code order.
    pub fn widths(&self) -> &[u8] {
        &self.widths
    }

    pub fn num_subquantizers(&self) -> usize {
        self.widths.len()
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    /// Subquantizers per group (`g`).
    pub fn group_len(&self) -> usize {
        self.groups[0].len()
    }

    pub fn pattern(&self) -> &[u8] {
        &self.groups[0]
    }

    pub fn word_width(&self) -> WordWidth {
        self.word_width
    }

    pub fn bits(&self, sub: usize) -> u8 {
        self.widths[sub]
    }

    pub fn num_centroids(&self, sub: usize) -> usize {
        1 << self.widths[sub]
    }

    pub fn dims(&self, sub: usize) -> std::ops::Range<usize> {
        let off = self.dim_offsets[sub];
        off..off + self.dim_alloc[sub]
    }

    pub fn code_bits(&self) -> usize {
        self.widths.iter().map(|&b| b as usize).sum()
    }

    pub fn structure(&self) -> CodeStructure {
        CodeStructure {
            pattern: self.groups[0].clone(),
            num_groups: self.groups.len(),
        }
    }
}

impl fmt::Display for PqSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (d={})", self.structure(), self.total_dims)
    }
}

/// Maps input dimensions to subquantizers proportionally to their bit widths.
///
/// Each subquantizer first receives `floor(d * b_j / B)` dimensions (at least
/// one). Any remainder is handed out one dimension at a time in subquantizer
/// order, which logs a warning since it unbalances the allocation.
pub fn allocate_dims(total_dims: usize, groups: &[Vec<u8>]) -> Result<PqSpec> {
    let widths: Vec<usize> = groups.iter().flatten().map(|&b| b as usize).collect();
    let m = widths.len();
    if m == 0 {
        return Err(Error::InvalidSpec("at least one subquantizer is required".into()));
    }
    if total_dims < m {
        return Err(Error::InvalidSpec(format!(
            "{total_dims} dimensions cannot cover {m} subquantizers"
        )));
    }
    let total_bits: usize = widths.iter().sum();
    let mut alloc: Vec<usize> = widths
        .iter()
        .map(|&b| (total_dims * b / total_bits).max(1))
        .collect();
    let mut assigned: usize = alloc.iter().sum();

    // Minimum-one bumps can overshoot; take back from the widest allocations.
    while assigned > total_dims {
        let j = (0..m).rev().max_by_key(|&j| alloc[j]).unwrap();
        alloc[j] -= 1;
        assigned -= 1;
    }
    if assigned < total_dims {
        warn!(
            "{total_dims} dimensions do not divide proportionally over {m} subquantizers; \
             distributing {} leftover dimensions one by one",
            total_dims - assigned
        );
        for j in (0..m).cycle().take(total_dims - assigned) {
            alloc[j] += 1;
        }
    }
    PqSpec::new(total_dims, groups.to_vec(), alloc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn groups(pattern: &[u8], n: usize) -> Vec<Vec<u8>> {
        vec![pattern.to_vec(); n]
    }

    #[test]
    fn sift_irregular_allocation() {
        let spec = allocate_dims(128, &groups(&[6, 6, 4], 4)).unwrap();
        assert_eq!(spec.dim_alloc(), [12, 12, 8].repeat(4).as_slice());
    }

    #[test]
    fn uniform_allocation() {
        let spec = allocate_dims(128, &groups(&[4, 4], 16)).unwrap();
        assert!(spec.dim_alloc().iter().all(|&d| d == 4));
    }

    /// Brute force over every split of 24 dims into three parts, minimizing
    /// the L1 deviation from the 6:6:4 proportion.
    fn best_split_24() -> Vec<usize> {
        let target = [24.0 * 6.0 / 16.0, 24.0 * 6.0 / 16.0, 24.0 * 4.0 / 16.0];
        let mut best = (f64::MAX, vec![]);
        for a in 1..24 {
            for b in 1..(24 - a) {
                let c = 24 - a - b;
                let dev = (a as f64 - target[0]).abs()
                    + (b as f64 - target[1]).abs()
                    + (c as f64 - target[2]).abs();
                if dev < best.0 {
                    best = (dev, vec![a, b, c]);
                }
            }
        }
        best.1
    }

    #[test]
    fn allocation_96_matches_enumeration() {
        let oracle = best_split_24();
        assert_eq!(oracle, vec![9, 9, 6]);
        let spec = allocate_dims(96, &groups(&[6, 6, 4], 4)).unwrap();
        assert_eq!(spec.dim_alloc(), oracle.repeat(4).as_slice());
    }

    #[test]
    fn leftover_dims_go_in_order() {
        // 100 * 6 / 64 = 9, 100 * 4 / 64 = 6: 96 assigned, 4 left over.
        let spec = allocate_dims(100, &groups(&[6, 6, 4], 4)).unwrap();
        let mut expected = [9, 9, 6].repeat(4);
        for e in expected.iter_mut().take(4) {
            *e += 1;
        }
        assert_eq!(spec.dim_alloc(), expected.as_slice());
    }

    #[test]
    fn tiny_dims_still_cover_every_subquantizer() {
        let spec = allocate_dims(12, &groups(&[6, 6, 4], 4)).unwrap();
        assert!(spec.dim_alloc().iter().all(|&d| d == 1));
        let spec = allocate_dims(13, &groups(&[6, 6, 4], 4)).unwrap();
        assert_eq!(spec.dim_alloc().iter().sum::<usize>(), 13);
    }

    #[test]
    fn too_few_dims_rejected() {
        let err = allocate_dims(11, &groups(&[6, 6, 4], 4)).unwrap_err();
        assert!(matches!(err, Error::InvalidSpec(_)));
    }

    #[test]
    fn parse_structures() {
        let s: CodeStructure = "16x{4,4}".parse().unwrap();
        assert_eq!((s.num_subquantizers(), s.num_groups()), (16, 8));
        let spec = PqSpec::from_structure(128, &s).unwrap();
        assert_eq!(spec.word_width(), WordWidth::W8);

        let s: CodeStructure = "12x{6,6,4}".parse().unwrap();
        assert_eq!(s.num_groups(), 4);
        assert_eq!(PqSpec::from_structure(128, &s).unwrap().word_width(), WordWidth::W16);

        let s: CodeStructure = "12x{5,5,5}".parse().unwrap();
        assert_eq!(s.code_bits(), 60);
        let s: CodeStructure = "8x{8}".parse().unwrap();
        assert_eq!(s.num_groups(), 8);
    }

    #[test]
    fn parse_rejects_bad_sums_and_syntax() {
        for bad in ["12x{5,4}", "12x{6,6,6}", "10x{4,4,4,4}", "x{4,4}", "16x4,4", "16x{}", "2x{9,7}"] {
            assert!(bad.parse::<CodeStructure>().is_err(), "{bad} accepted");
        }
        let msg = "12x{5,4}".parse::<CodeStructure>().unwrap_err().to_string();
        assert!(msg.contains("9 bits") && msg.contains("supported"), "{msg}");
    }

    #[test]
    fn display_round_trips() {
        for s in ["16x{4,4}", "12x{6,6,4}", "12x{6,5,5}", "8x{8,8}", "8x{8}", "4x{4,4,4,4}"] {
            let parsed: CodeStructure = s.parse().unwrap();
            assert_eq!(parsed.to_string(), s);
            assert_eq!(parsed.to_string().parse::<CodeStructure>().unwrap(), parsed);
        }
    }

    proptest::proptest! {
        #[test]
        fn allocation_sums_to_total(pattern_idx in 0usize..5, n in 1usize..10, extra in 0usize..200) {
            let pattern: &[u8] = [&[4u8, 4][..], &[6, 6, 4], &[6, 5, 5], &[8, 8], &[8]][pattern_idx];
            let gs = groups(pattern, n);
            let m = pattern.len() * n;
            let d = m + extra;
            let a = allocate_dims(d, &gs).unwrap();
            let b = allocate_dims(d, &gs).unwrap();
            proptest::prop_assert_eq!(a.dim_alloc().iter().sum::<usize>(), d);
            proptest::prop_assert!(a.dim_alloc().iter().all(|&x| x >= 1));
            proptest::prop_assert_eq!(a, b);
        }
    }
}
