//! Split tables: an 8-bit lookup built from shuffles of `2^s`-entry
//! sub-tables, recombined by a blend tree on index bits `s..8`.

use super::caps::Capabilities;

/// Portable model of the shuffle-blend lookup for native shuffle width
/// `native_bits` (4 to 8). Every sub-table is "shuffled" with the low bits of
/// each lane, then pairs of results are blended level by level, each level
/// keyed on the next index bit.
pub fn split_table_lookup<T: Copy>(indices: &[u8], table: &[T; 256], native_bits: u32) -> Vec<T> {
    assert!((4..=8).contains(&native_bits), "native shuffle width must be 4..=8 bits");
    let sub_len = 1usize << native_bits;
    let low = (sub_len - 1) as u8;
    let shuffled: Vec<Vec<T>> = table
        .chunks_exact(sub_len)
        .map(|sub| indices.iter().map(|&i| sub[(i & low) as usize]).collect())
        .collect();
    let mut level = shuffled;
    let mut bit = native_bits;
    while level.len() > 1 {
        level = level
            .chunks_exact(2)
            .map(|pair| {
                indices
                    .iter()
                    .enumerate()
                    .map(|(lane, &i)| if i >> bit & 1 == 1 { pair[1][lane] } else { pair[0][lane] })
                    .collect()
            })
            .collect();
        bit += 1;
    }
    level.pop().unwrap()
}

/// Shuffle and blend counts of one 8-bit lookup at native width `native_bits`.
pub fn split_op_counts(native_bits: u32) -> (usize, usize) {
    let subs = 1usize << (8 - native_bits);
    (subs, subs - 1)
}

/// 32 word lanes through the hardware split-table-16 lookup.
pub fn simd_split_lookup_u16(caps: &Capabilities, indices: &[u8; 32], table: &[u16; 256]) -> Option<[u16; 32]> {
    #[cfg(target_arch = "x86_64")]
    if caps.avx512bw {
        return Some(unsafe { super::x86::split_lookup_u16x32(indices, table) });
    }
    let _ = (caps, indices, table);
    None
}

/// 64 byte lanes through the hardware split-table-8 lookup.
pub fn simd_split_lookup_u8(caps: &Capabilities, indices: &[u8; 64], table: &[u8; 256]) -> Option<[u8; 64]> {
    #[cfg(target_arch = "x86_64")]
    if caps.avx512vbmi {
        return Some(unsafe { super::x86::split_lookup_u8x64(indices, table) });
    }
    let _ = (caps, indices, table);
    None
}
