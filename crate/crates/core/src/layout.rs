//! Packed, transposed code storage.
//!
//! The subcodes of one group are packed into an 8- or 16-bit word, first
//! subcode in the least-significant bits. Codes are then transposed into
//! blocks of `block_len` codes: row `r` of a block holds the group-`r` word
//! of every code in the block, contiguously, so one vector load fetches the
//! same group for `block_len` codes. Rows follow each other in group order
//! and blocks of a list follow each other in list order. Multi-byte words
//! are little-endian.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use crate::error::{Error, Result};
use crate::quantizer::{Code, PqSpec, WordWidth};

pub const DATABASE_MAGIC: &[u8; 4] = b"QADB";
pub const DATABASE_VERSION: u32 = 1;

/// Bit width and offset of one subcode inside a packed group word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SubcodeSlot {
    pub bits: u8,
    pub shift: u8,
}

impl SubcodeSlot {
    #[inline]
    pub fn mask(self) -> u16 {
        ((1u32 << self.bits) - 1) as u16
    }
}

/// How codes of a spec are packed into words and transposed into blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PackingScheme {
    word_width: WordWidth,
    block_len: usize,
    num_groups: usize,
    group_layout: Vec<SubcodeSlot>,
}

impl PackingScheme {
    pub fn new(spec: &PqSpec, block_len: usize) -> Result<Self> {
        if ![16, 32, 64].contains(&block_len) {
            return Err(Error::Config(format!("block length {block_len} is not 16, 32 or 64")));
        }
        Ok(Self {
            word_width: spec.word_width(),
            block_len,
            num_groups: spec.num_groups(),
            group_layout: group_layout(spec.pattern()),
        })
    }

    /// Block length matched to the kernel family for this spec: 64 for
    /// `{8}` byte codes, 16 for other byte-packed codes, 32 for word codes.
    pub fn default_for(spec: &PqSpec) -> Result<Self> {
        Self::new(spec, default_block_len(spec))
    }

    pub fn word_width(&self) -> WordWidth {
        self.word_width
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    pub fn group_layout(&self) -> &[SubcodeSlot] {
        &self.group_layout
    }

    pub fn group_len(&self) -> usize {
        self.group_layout.len()
    }

    pub fn num_subquantizers(&self) -> usize {
        self.group_layout.len() * self.num_groups
    }

    pub fn row_bytes(&self) -> usize {
        self.block_len * self.word_width.bytes()
    }

    /// Size of every block regardless of occupancy.
    pub fn block_bytes(&self) -> usize {
        self.num_groups * self.row_bytes()
    }

    /// Subquantizer widths in code order.
    pub fn widths(&self) -> Vec<u8> {
        (0..self.num_groups)
            .flat_map(|_| self.group_layout.iter().map(|s| s.bits))
            .collect()
    }

    pub fn matches(&self, spec: &PqSpec) -> bool {
        self.word_width == spec.word_width()
            && self.num_groups == spec.num_groups()
            && self.group_layout == group_layout(spec.pattern())
    }
}

pub fn default_block_len(spec: &PqSpec) -> usize {
    match (spec.word_width(), spec.pattern()) {
        (WordWidth::W8, [8]) => 64,
        (WordWidth::W8, _) => 16,
        (WordWidth::W16, _) => 32,
    }
}

fn group_layout(pattern: &[u8]) -> Vec<SubcodeSlot> {
    let mut shift = 0;
    pattern
        .iter()
        .map(|&bits| {
            let s = SubcodeSlot { bits, shift };
            shift += bits;
            s
        })
        .collect()
}

/// Packs one group's subcodes, first subcode in the low bits.
pub fn pack_group(sub_indices: &[u8], layout: &[SubcodeSlot]) -> Result<u16> {
    if sub_indices.len() != layout.len() {
        return Err(Error::corrupt(format!(
            "{} subcodes for a group of {}",
            sub_indices.len(),
            layout.len()
        )));
    }
    let mut word = 0u16;
    for (&i, slot) in sub_indices.iter().zip(layout) {
        if i as u16 > slot.mask() {
            return Err(Error::corrupt(format!("subcode {i} does not fit in {} bits", slot.bits)));
        }
        word |= (i as u16) << slot.shift;
    }
    Ok(word)
}

pub fn unpack_group(word: u16, layout: &[SubcodeSlot]) -> Vec<u8> {
    layout.iter().map(|s| ((word >> s.shift) & s.mask()) as u8).collect()
}

/// Borrowed view of one transposed block.
#[derive(Debug, Clone, Copy)]
pub struct BlockRef<'a> {
    pub data: &'a [u8],
    pub occupancy: usize,
}

impl BlockRef<'_> {
    #[inline]
    pub fn word(&self, scheme: &PackingScheme, row: usize, pos: usize) -> u16 {
        let k = row * scheme.block_len + pos;
        match scheme.word_width {
            WordWidth::W8 => self.data[k] as u16,
            WordWidth::W16 => u16::from_le_bytes([self.data[2 * k], self.data[2 * k + 1]]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedBlock {
    data: Vec<u8>,
    occupancy: usize,
}

impl PackedBlock {
    pub fn occupancy(&self) -> usize {
        self.occupancy
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn as_ref(&self) -> BlockRef<'_> {
        BlockRef { data: &self.data, occupancy: self.occupancy }
    }

    pub fn word(&self, scheme: &PackingScheme, row: usize, pos: usize) -> u16 {
        self.as_ref().word(scheme, row, pos)
    }
}

/// Transposes up to `block_len` codes into a block; padding slots are all ones.
pub fn transpose_block(codes: &[Code], scheme: &PackingScheme) -> Result<PackedBlock> {
    if codes.is_empty() {
        return Err(Error::input("cannot transpose an empty block"));
    }
    if codes.len() > scheme.block_len {
        return Err(Error::input(format!(
            "{} codes exceed the block length {}",
            codes.len(),
            scheme.block_len
        )));
    }
    let m = scheme.num_subquantizers();
    let mut flat = Vec::with_capacity(codes.len() * m);
    for c in codes {
        if c.0.len() != m {
            return Err(Error::corrupt(format!("code has {} subcodes, expected {m}", c.0.len())));
        }
        flat.extend_from_slice(&c.0);
    }
    let mut data = vec![0xff; scheme.block_bytes()];
    write_block(&mut data, &flat, scheme)?;
    Ok(PackedBlock { data, occupancy: codes.len() })
}

/// Packs `flat` (codes of `m` subcodes each) into a pre-filled block buffer.
fn write_block(block: &mut [u8], flat: &[u8], scheme: &PackingScheme) -> Result<()> {
    let m = scheme.num_subquantizers();
    let g = scheme.group_len();
    for (pos, code) in flat.chunks_exact(m).enumerate() {
        for row in 0..scheme.num_groups {
            let w = pack_group(&code[row * g..(row + 1) * g], &scheme.group_layout)?;
            let k = row * scheme.block_len + pos;
            match scheme.word_width {
                WordWidth::W8 => block[k] = w as u8,
                WordWidth::W16 => block[2 * k..2 * k + 2].copy_from_slice(&w.to_le_bytes()),
            }
        }
    }
    Ok(())
}

pub fn untranspose_block(block: BlockRef<'_>, scheme: &PackingScheme) -> Vec<Code> {
    (0..block.occupancy)
        .map(|pos| {
            Code(
                (0..scheme.num_groups)
                    .flat_map(|row| unpack_group(block.word(scheme, row, pos), &scheme.group_layout))
                    .collect(),
            )
        })
        .collect()
}

/// A list of codes stored as consecutive transposed blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedList {
    len: usize,
    data: Vec<u8>,
}

impl PackedList {
    pub fn empty() -> Self {
        Self { len: 0, data: Vec::new() }
    }

    /// Packs `flat`, a concatenation of codes with `m` subcode indices each.
    pub fn from_flat_codes(flat: &[u8], scheme: &PackingScheme) -> Result<Self> {
        let m = scheme.num_subquantizers();
        if flat.len() % m != 0 {
            return Err(Error::corrupt("flat code buffer is not a whole number of codes"));
        }
        let len = flat.len() / m;
        let num_blocks = len.div_ceil(scheme.block_len);
        let bb = scheme.block_bytes();
        let mut data = vec![0xff; num_blocks * bb];
        for (b, chunk) in flat.chunks(m * scheme.block_len).enumerate() {
            write_block(&mut data[b * bb..(b + 1) * bb], chunk, scheme)?;
        }
        Ok(Self { len, data })
    }

    pub fn from_codes(codes: &[Code], scheme: &PackingScheme) -> Result<Self> {
        let flat: Vec<u8> = codes.iter().flat_map(|c| c.0.iter().copied()).collect();
        if codes.iter().any(|c| c.0.len() != scheme.num_subquantizers()) {
            return Err(Error::corrupt("code length does not match the packing scheme"));
        }
        Self::from_flat_codes(&flat, scheme)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn num_blocks(&self, scheme: &PackingScheme) -> usize {
        self.len.div_ceil(scheme.block_len)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn block<'a>(&'a self, scheme: &PackingScheme, b: usize) -> BlockRef<'a> {
        let bb = scheme.block_bytes();
        BlockRef {
            data: &self.data[b * bb..(b + 1) * bb],
            occupancy: (self.len - b * scheme.block_len).min(scheme.block_len),
        }
    }

    pub fn blocks<'a>(&'a self, scheme: &'a PackingScheme) -> impl Iterator<Item = BlockRef<'a>> + 'a {
        (0..self.num_blocks(scheme)).map(move |b| self.block(scheme, b))
    }

    /// Subcode indices of code `i`.
    pub fn code(&self, scheme: &PackingScheme, i: usize) -> Code {
        let block = self.block(scheme, i / scheme.block_len);
        let pos = i % scheme.block_len;
        Code(
            (0..scheme.num_groups)
                .flat_map(|row| unpack_group(block.word(scheme, row, pos), &scheme.group_layout))
                .collect(),
        )
    }

    pub fn codes(&self, scheme: &PackingScheme) -> Vec<Code> {
        self.blocks(scheme).flat_map(|b| untranspose_block(b, scheme)).collect()
    }
}

/// Writes the encoded database container:
///
/// ```text
/// "QADB" | version u32 | spec hash u64
/// | word bits u8 | block_len u16 | group_len u8 | widths u8*group_len | num_groups u32
/// | list count u32 | per list: code count u32, blocks (ceil(count/block_len) * block_bytes)
/// ```
pub fn write_database<W: Write>(w: &mut W, spec_hash: u64, scheme: &PackingScheme, lists: &[PackedList]) -> Result<()> {
    w.write_all(DATABASE_MAGIC)?;
    w.write_u32::<LittleEndian>(DATABASE_VERSION)?;
    w.write_u64::<LittleEndian>(spec_hash)?;
    w.write_u8(scheme.word_width.bits() as u8)?;
    w.write_u16::<LittleEndian>(scheme.block_len as u16)?;
    w.write_u8(scheme.group_len() as u8)?;
    for s in &scheme.group_layout {
        w.write_u8(s.bits)?;
    }
    w.write_u32::<LittleEndian>(scheme.num_groups as u32)?;
    w.write_u32::<LittleEndian>(lists.len() as u32)?;
    for l in lists {
        w.write_u32::<LittleEndian>(l.len as u32)?;
        w.write_all(&l.data)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Database {
    pub spec_hash: u64,
    pub scheme: PackingScheme,
    pub lists: Vec<PackedList>,
}

pub fn read_database<R: Read>(r: &mut R) -> Result<Database> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != DATABASE_MAGIC {
        return Err(Error::corrupt("not an encoded database (bad magic)"));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != DATABASE_VERSION {
        return Err(Error::corrupt(format!("unsupported database version {version}")));
    }
    let spec_hash = r.read_u64::<LittleEndian>()?;
    let word_width = WordWidth::from_bits(r.read_u8()? as u32)
        .ok_or_else(|| Error::corrupt("invalid word width"))?;
    let block_len = r.read_u16::<LittleEndian>()? as usize;
    if ![16, 32, 64].contains(&block_len) {
        return Err(Error::corrupt(format!("invalid block length {block_len}")));
    }
    let group_len = r.read_u8()? as usize;
    let mut pattern = vec![0u8; group_len];
    r.read_exact(&mut pattern)?;
    let num_groups = r.read_u32::<LittleEndian>()? as usize;
    let bits: u32 = pattern.iter().map(|&b| b as u32).sum();
    if group_len == 0 || bits > word_width.bits() || num_groups == 0 || num_groups > 1 << 16 {
        return Err(Error::corrupt("invalid packing scheme"));
    }
    let scheme = PackingScheme {
        word_width,
        block_len,
        num_groups,
        group_layout: group_layout(&pattern),
    };
    let list_count = r.read_u32::<LittleEndian>()? as usize;
    let mut lists = Vec::with_capacity(list_count.min(1 << 20));
    for _ in 0..list_count {
        let len = r.read_u32::<LittleEndian>()? as usize;
        let mut data = vec![0u8; len.div_ceil(block_len) * scheme.block_bytes()];
        r.read_exact(&mut data)?;
        lists.push(PackedList { len, data });
    }
    Ok(Database { spec_hash, scheme, lists })
}
