//! Block scanning: lookup, saturated add and candidate collection.
//!
//! `scan_block_scalar` defines the semantics. Vector kernels compute every
//! lane of a block at once, drop lanes above the admission bound the heap had
//! when the block started, and push the survivors in lane order, so they
//! mutate the heap exactly like the scalar loop.

mod caps;
mod heap;
pub mod selftest;
mod split;
#[cfg(target_arch = "x86_64")]
mod x86;

use std::fmt;
use std::str::FromStr;

use log::debug;
use ordered_float::OrderedFloat;

pub use caps::{Capabilities, Isa};
pub use heap::CandidateHeap;
pub use split::{simd_split_lookup_u16, simd_split_lookup_u8, split_op_counts, split_table_lookup};

use crate::distance::{DistanceTables, DistanceWidth, QuantizedTables};
use crate::error::{Error, Result};
use crate::layout::{BlockRef, PackedList, PackingScheme};
use crate::quantizer::{PqSpec, WordWidth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    ScalarFloat,
    ScalarQuantized,
    /// 16-entry byte shuffles, 8-bit distances: `{4,4}`.
    Shuffle16x8,
    /// 32/64-entry word permutes, 16-bit distances: word groups of widths up to 6.
    Permute32x16,
    /// 8-bit word lookups from 4 two-register permutes and 3 blends: `{8,8}`.
    SplitTable16,
    /// 8-bit byte lookups from 2 two-register permutes and 1 blend: `{8}`.
    SplitTable8,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 6] = [
        KernelFamily::ScalarFloat,
        KernelFamily::ScalarQuantized,
        KernelFamily::Shuffle16x8,
        KernelFamily::Permute32x16,
        KernelFamily::SplitTable16,
        KernelFamily::SplitTable8,
    ];

    pub const VECTOR: [KernelFamily; 4] = [
        KernelFamily::Shuffle16x8,
        KernelFamily::Permute32x16,
        KernelFamily::SplitTable16,
        KernelFamily::SplitTable8,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::ScalarFloat => "scalar-float",
            KernelFamily::ScalarQuantized => "scalar-quantized",
            KernelFamily::Shuffle16x8 => "shuffle16x8",
            KernelFamily::Permute32x16 => "permute32x16",
            KernelFamily::SplitTable16 => "split-table-16",
            KernelFamily::SplitTable8 => "split-table-8",
        }
    }

    pub fn is_vector(self) -> bool {
        !matches!(self, KernelFamily::ScalarFloat | KernelFamily::ScalarQuantized)
    }

    /// Whether the family's lookups and lane count fit this packing.
    pub fn supports(self, scheme: &PackingScheme) -> bool {
        let widths: Vec<u8> = scheme.group_layout().iter().map(|s| s.bits).collect();
        match self {
            KernelFamily::ScalarFloat | KernelFamily::ScalarQuantized => true,
            KernelFamily::Shuffle16x8 => {
                scheme.word_width() == WordWidth::W8 && widths == [4, 4] && scheme.block_len() == 16
            }
            KernelFamily::Permute32x16 => {
                scheme.word_width() == WordWidth::W16 && widths.iter().all(|&b| b <= 6) && scheme.block_len() == 32
            }
            KernelFamily::SplitTable16 => {
                scheme.word_width() == WordWidth::W16 && widths == [8, 8] && scheme.block_len() == 32
            }
            KernelFamily::SplitTable8 => {
                scheme.word_width() == WordWidth::W8 && widths == [8] && scheme.block_len() == 64
            }
        }
    }

    /// Distance width the family accumulates at; `None` for scalar families.
    pub fn distance_width(self) -> Option<DistanceWidth> {
        match self {
            KernelFamily::Shuffle16x8 | KernelFamily::SplitTable8 => Some(DistanceWidth::U8),
            KernelFamily::Permute32x16 | KernelFamily::SplitTable16 => Some(DistanceWidth::U16),
            _ => None,
        }
    }

    /// ISA variants of the family, preferred first.
    pub fn variants(self) -> &'static [Isa] {
        match self {
            KernelFamily::ScalarFloat | KernelFamily::ScalarQuantized => &[Isa::Scalar],
            KernelFamily::Shuffle16x8 => &[Isa::Avx512Bw, Isa::Avx2, Isa::Ssse3],
            KernelFamily::Permute32x16 | KernelFamily::SplitTable16 => &[Isa::Avx512Bw],
            KernelFamily::SplitTable8 => &[Isa::Avx512Vbmi],
        }
    }

    /// Variants compiled for this target and supported by `caps`.
    pub fn available_variants(self, caps: &Capabilities) -> Vec<Isa> {
        self.variants()
            .iter()
            .copied()
            .filter(|&isa| isa == Isa::Scalar || (cfg!(target_arch = "x86_64") && caps.has(isa)))
            .collect()
    }

    /// Lookup units one subquantizer table of `bits` occupies.
    pub fn table_registers_per_sub(self, bits: u8) -> usize {
        match self {
            KernelFamily::ScalarFloat | KernelFamily::ScalarQuantized => 0,
            KernelFamily::Shuffle16x8 => 1,
            KernelFamily::Permute32x16 => (1usize << bits).div_ceil(32),
            KernelFamily::SplitTable16 => 4,
            KernelFamily::SplitTable8 => 2,
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = match s {
            "scalar" => "scalar-quantized",
            "float" => "scalar-float",
            other => other,
        };
        KernelFamily::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = KernelFamily::ALL.iter().map(|k| k.name()).collect();
            Error::Config(format!("unknown kernel {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelChoice {
    pub family: KernelFamily,
    pub isa: Isa,
    /// Why a requested or preferred vector kernel was not used.
    pub fallback: Option<String>,
}

/// Best kernel for `scheme` on a host with `caps`, or the forced family when
/// it can run. Unusable requests fall back to scalar-quantized with a reason.
pub fn select_kernel(spec: &PqSpec, scheme: &PackingScheme, caps: &Capabilities, forced: Option<KernelFamily>) -> KernelChoice {
    let scalar = |reason: Option<String>| KernelChoice {
        family: KernelFamily::ScalarQuantized,
        isa: Isa::Scalar,
        fallback: reason,
    };
    match forced {
        Some(f) if !f.is_vector() => KernelChoice { family: f, isa: Isa::Scalar, fallback: None },
        Some(f) => {
            if !f.supports(scheme) {
                return scalar(Some(format!("{f} cannot scan {}", spec.structure())));
            }
            match f.available_variants(caps).first() {
                Some(&isa) => KernelChoice { family: f, isa, fallback: None },
                None => scalar(Some(format!("{f} needs {} which this host lacks", f.variants()[0]))),
            }
        }
        None => {
            let mut reason = format!("no vector kernel matches {}", spec.structure());
            for f in KernelFamily::VECTOR {
                if !f.supports(scheme) {
                    continue;
                }
                if let Some(&isa) = f.available_variants(caps).first() {
                    return KernelChoice { family: f, isa, fallback: None };
                }
                reason = format!("{f} needs {} which this host lacks", f.variants()[0]);
            }
            scalar(Some(reason))
        }
    }
}

fn check_tables(scheme: &PackingScheme, widths: &[u8]) -> Result<()> {
    if scheme.widths() != widths {
        return Err(Error::Config("lookup tables do not match the packing scheme".into()));
    }
    Ok(())
}

fn check_block(block: &BlockRef<'_>, scheme: &PackingScheme, ids: &[u32]) -> Result<()> {
    if block.data.len() != scheme.block_bytes() || block.occupancy > scheme.block_len() {
        return Err(Error::Config("block does not match the packing scheme".into()));
    }
    if ids.len() < block.occupancy {
        return Err(Error::input(format!("{} ids for {} codes", ids.len(), block.occupancy)));
    }
    Ok(())
}

/// Reference scan: per occupied slot, unpack, look up, saturate at the table
/// width and offer `(distance, id)` to the heap.
pub fn scan_block_scalar(
    block: BlockRef<'_>,
    scheme: &PackingScheme,
    qtables: &QuantizedTables,
    ids: &[u32],
    heap: &mut CandidateHeap<u32>,
) -> Result<()> {
    check_tables(scheme, qtables.widths())?;
    check_block(&block, scheme, ids)?;
    scalar_lanes(block, scheme, qtables, ids, heap);
    Ok(())
}

fn scalar_lanes(block: BlockRef<'_>, scheme: &PackingScheme, qtables: &QuantizedTables, ids: &[u32], heap: &mut CandidateHeap<u32>) {
    let q_max = qtables.q_max() as u32;
    let g = scheme.group_len();
    for pos in 0..block.occupancy {
        let mut acc = qtables.bias() as u32;
        for row in 0..scheme.num_groups() {
            let w = block.word(scheme, row, pos);
            for (s, slot) in scheme.group_layout().iter().enumerate() {
                let i = ((w >> slot.shift) & slot.mask()) as usize;
                acc = (acc + qtables.entry(row * g + s, i) as u32).min(q_max);
            }
        }
        heap.push(acc, ids[pos]);
    }
}

/// Float ADC scan of packed blocks; accumulates in table order like
/// [`DistanceTables::adc`].
pub struct FloatScanner<'a> {
    scheme: &'a PackingScheme,
    entries: &'a [f32],
    offsets: &'a [usize],
}

impl<'a> FloatScanner<'a> {
    pub fn new(tables: &'a DistanceTables, scheme: &'a PackingScheme) -> Result<Self> {
        check_tables(scheme, tables.widths())?;
        let (entries, offsets) = tables.flat();
        Ok(Self { scheme, entries, offsets })
    }

    pub fn scan_block(&self, block: BlockRef<'_>, ids: &[u32], heap: &mut CandidateHeap<OrderedFloat<f32>>) -> Result<()> {
        check_block(&block, self.scheme, ids)?;
        self.lanes(block, ids, heap);
        Ok(())
    }

    pub fn scan_list(&self, list: &PackedList, ids: &[u32], heap: &mut CandidateHeap<OrderedFloat<f32>>) -> Result<()> {
        check_list(list, self.scheme, ids)?;
        let bl = self.scheme.block_len();
        for (b, block) in list.blocks(self.scheme).enumerate() {
            self.lanes(block, &ids[b * bl..], heap);
        }
        Ok(())
    }

    fn lanes(&self, block: BlockRef<'_>, ids: &[u32], heap: &mut CandidateHeap<OrderedFloat<f32>>) {
        let s = self.scheme;
        let g = s.group_len();
        let layout = s.group_layout();
        for pos in 0..block.occupancy {
            let mut acc = 0f32;
            for row in 0..s.num_groups() {
                let w = block.word(s, row, pos);
                for (k, slot) in layout.iter().enumerate() {
                    let i = ((w >> slot.shift) & slot.mask()) as usize;
                    acc += self.entries[self.offsets[row * g + k] + i];
                }
            }
            heap.push(OrderedFloat(acc), ids[pos]);
        }
    }
}

fn check_list(list: &PackedList, scheme: &PackingScheme, ids: &[u32]) -> Result<()> {
    if list.as_bytes().len() != list.num_blocks(scheme) * scheme.block_bytes() {
        return Err(Error::Config("list does not match the packing scheme".into()));
    }
    if ids.len() != list.len() {
        return Err(Error::input(format!("{} ids for {} codes", ids.len(), list.len())));
    }
    Ok(())
}

/// Parameters of one subquantizer in the word-permute kernel.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PermuteSlot {
    pub shift: u32,
    /// 64-entry table in two registers rather than 32 in one.
    pub wide: bool,
}

#[derive(Debug, Clone)]
enum Prepared {
    Scalar,
    Nibble { lo: Vec<u8>, hi: Vec<u8> },
    Permute { slots: Vec<PermuteSlot>, tables: Vec<u16> },
    Split16 { tables: Vec<u16> },
    Split8 { tables: Vec<u8> },
}

/// Quantized tables laid out for one kernel variant.
#[derive(Debug, Clone)]
pub struct QuantizedScanner {
    scheme: PackingScheme,
    qtables: QuantizedTables,
    family: KernelFamily,
    isa: Isa,
    prepared: Prepared,
}

impl QuantizedScanner {
    /// `caps` must offer `isa`; unusable combinations are configuration errors.
    pub fn new(qtables: &QuantizedTables, scheme: &PackingScheme, family: KernelFamily, isa: Isa, caps: &Capabilities) -> Result<Self> {
        check_tables(scheme, qtables.widths())?;
        let prepared = match family {
            KernelFamily::ScalarFloat => {
                return Err(Error::Config("scalar-float scans float tables, not quantized ones".into()))
            }
            KernelFamily::ScalarQuantized => Prepared::Scalar,
            f => {
                if !f.supports(scheme) {
                    return Err(Error::Config(format!("{f} does not support this packing")));
                }
                if !f.available_variants(caps).contains(&isa) {
                    return Err(Error::Config(format!("{f} has no {isa} variant on this host")));
                }
                if f.distance_width() != Some(qtables.width()) {
                    return Err(Error::Config(format!("{f} needs {}-bit distances", f.distance_width().unwrap().bits())));
                }
                prepare(f, scheme, qtables)
            }
        };
        let isa = if family.is_vector() { isa } else { Isa::Scalar };
        debug!("scanner {family}/{isa} for {} groups", scheme.num_groups());
        Ok(Self { scheme: scheme.clone(), qtables: qtables.clone(), family, isa, prepared })
    }

    pub fn for_choice(qtables: &QuantizedTables, scheme: &PackingScheme, choice: &KernelChoice, caps: &Capabilities) -> Result<Self> {
        Self::new(qtables, scheme, choice.family, choice.isa, caps)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn isa(&self) -> Isa {
        self.isa
    }

    pub fn qtables(&self) -> &QuantizedTables {
        &self.qtables
    }

    pub fn scan_block(&self, block: BlockRef<'_>, ids: &[u32], heap: &mut CandidateHeap<u32>) -> Result<()> {
        check_block(&block, &self.scheme, ids)?;
        self.block(block, ids, heap);
        Ok(())
    }

    pub fn scan_list(&self, list: &PackedList, ids: &[u32], heap: &mut CandidateHeap<u32>) -> Result<()> {
        check_list(list, &self.scheme, ids)?;
        let bl = self.scheme.block_len();
        for (b, block) in list.blocks(&self.scheme).enumerate() {
            self.block(block, &ids[b * bl..], heap);
        }
        Ok(())
    }

    #[inline]
    fn block(&self, block: BlockRef<'_>, ids: &[u32], heap: &mut CandidateHeap<u32>) {
        if let Prepared::Scalar = self.prepared {
            return scalar_lanes(block, &self.scheme, &self.qtables, ids, heap);
        }
        let q_max = self.qtables.q_max() as u32;
        let thr = heap.admission_bound().map_or(q_max, |d| d.min(q_max));
        let mut out = [0u8; 128];
        let mut mask = self.lanes(block.data, thr, &mut out);
        if block.occupancy < 64 {
            mask &= (1u64 << block.occupancy) - 1;
        }
        let wide = self.qtables.width() == DistanceWidth::U16;
        while mask != 0 {
            let lane = mask.trailing_zeros() as usize;
            let d = if wide {
                u16::from_le_bytes([out[2 * lane], out[2 * lane + 1]]) as u32
            } else {
                out[lane] as u32
            };
            heap.push(d, ids[lane]);
            mask &= mask - 1;
        }
    }

    #[cfg(target_arch = "x86_64")]
    fn lanes(&self, data: &[u8], thr: u32, out: &mut [u8; 128]) -> u64 {
        let rows = self.scheme.num_groups();
        let bias = self.qtables.bias();
        let p = data.as_ptr();
        let o = out.as_mut_ptr();
        // Safety: `new` checked the host features for `isa`, and block and
        // table buffers are sized by the same packing scheme.
        unsafe {
            match &self.prepared {
                Prepared::Nibble { lo, hi } => {
                    let (l, h) = (lo.as_ptr(), hi.as_ptr());
                    match self.isa {
                        Isa::Ssse3 => x86::shuffle16_ssse3(p, rows, l, h, bias as u8, thr as u8, o),
                        Isa::Avx2 => x86::shuffle16_avx2(p, rows, l, h, bias as u8, thr as u8, o),
                        _ => x86::shuffle16_avx512(p, rows, l, h, bias as u8, thr as u8, o),
                    }
                }
                Prepared::Permute { slots, tables } => x86::permute32(p, rows, slots, tables.as_ptr(), bias, thr as u16, o),
                Prepared::Split16 { tables } => x86::split16(p, rows, tables.as_ptr(), bias, thr as u16, o),
                Prepared::Split8 { tables } => x86::split8(p, rows, tables.as_ptr(), bias as u8, thr as u8, o),
                Prepared::Scalar => unreachable!(),
            }
        }
    }

    #[cfg(not(target_arch = "x86_64"))]
    fn lanes(&self, _data: &[u8], _thr: u32, _out: &mut [u8; 128]) -> u64 {
        unreachable!("vector kernels are only built for x86-64")
    }
}

fn prepare(family: KernelFamily, scheme: &PackingScheme, q: &QuantizedTables) -> Prepared {
    let m = scheme.num_subquantizers();
    match family {
        KernelFamily::Shuffle16x8 => {
            let mut lo = Vec::with_capacity(m * 8);
            let mut hi = Vec::with_capacity(m * 8);
            for r in 0..scheme.num_groups() {
                lo.extend((0..16).map(|i| q.entry(2 * r, i) as u8));
                hi.extend((0..16).map(|i| q.entry(2 * r + 1, i) as u8));
            }
            Prepared::Nibble { lo, hi }
        }
        KernelFamily::Permute32x16 => {
            let slots = scheme
                .group_layout()
                .iter()
                .map(|s| PermuteSlot { shift: s.shift as u32, wide: s.bits == 6 })
                .collect();
            let mut tables = Vec::with_capacity(m * 64);
            for j in 0..m {
                let t = q.table_u16(j);
                tables.extend((0..64).map(|i| t[i % t.len()]));
            }
            Prepared::Permute { slots, tables }
        }
        KernelFamily::SplitTable16 => Prepared::Split16 { tables: (0..m).flat_map(|j| q.table_u16(j)).collect() },
        KernelFamily::SplitTable8 => Prepared::Split8 {
            tables: (0..m).flat_map(|j| q.table_u16(j)).map(|e| e as u8).collect(),
        },
        _ => Prepared::Scalar,
    }
}
