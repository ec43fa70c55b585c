//! x86-64 lookup-add kernels. Each computes the saturated distance of every
//! lane of one block, stores the lanes to `out` and returns the bitmask of
//! lanes whose distance is at most `thr`.
//!
//! Callers guarantee block and table lengths and the required features.

use std::arch::x86_64::*;

use super::PermuteSlot;

// 4-bit lookups, 8-bit distances, byte-packed {4,4} rows of 16 codes.
// `lo`/`hi` hold the 16-entry table of each row's low/high nibble.

#[target_feature(enable = "ssse3")]
unsafe fn row16_ssse3(acc: __m128i, w: __m128i, lo: *const u8, hi: *const u8) -> __m128i {
    let nib = _mm_set1_epi8(0x0f);
    let l = _mm_and_si128(w, nib);
    let h = _mm_and_si128(_mm_srli_epi16(w, 4), nib);
    let acc = _mm_adds_epu8(acc, _mm_shuffle_epi8(_mm_loadu_si128(lo as *const __m128i), l));
    _mm_adds_epu8(acc, _mm_shuffle_epi8(_mm_loadu_si128(hi as *const __m128i), h))
}

#[target_feature(enable = "ssse3")]
unsafe fn finish16(acc: __m128i, bias: u8, thr: u8, out: *mut u8) -> u64 {
    let acc = _mm_adds_epu8(acc, _mm_set1_epi8(bias as i8));
    _mm_storeu_si128(out as *mut __m128i, acc);
    let le = _mm_cmpeq_epi8(_mm_min_epu8(acc, _mm_set1_epi8(thr as i8)), acc);
    _mm_movemask_epi8(le) as u32 as u64
}

#[target_feature(enable = "ssse3")]
pub(crate) unsafe fn shuffle16_ssse3(block: *const u8, rows: usize, lo: *const u8, hi: *const u8, bias: u8, thr: u8, out: *mut u8) -> u64 {
    let mut acc = _mm_setzero_si128();
    for r in 0..rows {
        let w = _mm_loadu_si128(block.add(r * 16) as *const __m128i);
        acc = row16_ssse3(acc, w, lo.add(r * 16), hi.add(r * 16));
    }
    finish16(acc, bias, thr, out)
}

#[target_feature(enable = "avx2")]
pub(crate) unsafe fn shuffle16_avx2(block: *const u8, rows: usize, lo: *const u8, hi: *const u8, bias: u8, thr: u8, out: *mut u8) -> u64 {
    let nib = _mm256_set1_epi8(0x0f);
    let mut acc = _mm256_setzero_si256();
    let mut r = 0;
    while r + 2 <= rows {
        let w = _mm256_loadu_si256(block.add(r * 16) as *const __m256i);
        let l = _mm256_and_si256(w, nib);
        let h = _mm256_and_si256(_mm256_srli_epi16(w, 4), nib);
        let tl = _mm256_loadu_si256(lo.add(r * 16) as *const __m256i);
        let th = _mm256_loadu_si256(hi.add(r * 16) as *const __m256i);
        acc = _mm256_adds_epu8(acc, _mm256_shuffle_epi8(tl, l));
        acc = _mm256_adds_epu8(acc, _mm256_shuffle_epi8(th, h));
        r += 2;
    }
    let mut acc = _mm_adds_epu8(_mm256_castsi256_si128(acc), _mm256_extracti128_si256(acc, 1));
    if r < rows {
        let w = _mm_loadu_si128(block.add(r * 16) as *const __m128i);
        acc = row16_ssse3(acc, w, lo.add(r * 16), hi.add(r * 16));
    }
    finish16(acc, bias, thr, out)
}

#[target_feature(enable = "avx512f,avx512bw,avx2")]
pub(crate) unsafe fn shuffle16_avx512(block: *const u8, rows: usize, lo: *const u8, hi: *const u8, bias: u8, thr: u8, out: *mut u8) -> u64 {
    let nib = _mm512_set1_epi8(0x0f);
    let mut acc = _mm512_setzero_si512();
    let mut r = 0;
    while r + 4 <= rows {
        let w = _mm512_loadu_si512(block.add(r * 16) as *const _);
        let l = _mm512_and_si512(w, nib);
        let h = _mm512_and_si512(_mm512_srli_epi16(w, 4), nib);
        let tl = _mm512_loadu_si512(lo.add(r * 16) as *const _);
        let th = _mm512_loadu_si512(hi.add(r * 16) as *const _);
        acc = _mm512_adds_epu8(acc, _mm512_shuffle_epi8(tl, l));
        acc = _mm512_adds_epu8(acc, _mm512_shuffle_epi8(th, h));
        r += 4;
    }
    let a = _mm256_adds_epu8(_mm512_castsi512_si256(acc), _mm512_extracti64x4_epi64(acc, 1));
    let mut acc = _mm_adds_epu8(_mm256_castsi256_si128(a), _mm256_extracti128_si256(a, 1));
    while r < rows {
        let w = _mm_loadu_si128(block.add(r * 16) as *const __m128i);
        acc = row16_ssse3(acc, w, lo.add(r * 16), hi.add(r * 16));
        r += 1;
    }
    finish16(acc, bias, thr, out)
}

// 5/6-bit lookups, 16-bit distances, word rows of 32 codes. `tables` holds
// 64 words per subquantizer; narrower tables are repeated to fill them, so
// bits of the next subcode above the index are harmless.
#[target_feature(enable = "avx512f,avx512bw")]
pub(crate) unsafe fn permute32(
    block: *const u8,
    rows: usize,
    slots: &[PermuteSlot],
    tables: *const u16,
    bias: u16,
    thr: u16,
    out: *mut u8,
) -> u64 {
    let g = slots.len();
    let mut acc = _mm512_set1_epi16(bias as i16);
    for r in 0..rows {
        let w = _mm512_loadu_si512(block.add(r * 64) as *const _);
        for (s, slot) in slots.iter().enumerate() {
            let t = tables.add((r * g + s) * 64);
            let idx = if slot.shift == 0 {
                w
            } else {
                _mm512_srl_epi16(w, _mm_cvtsi32_si128(slot.shift as i32))
            };
            let t0 = _mm512_loadu_si512(t as *const _);
            let v = if slot.wide {
                let t1 = _mm512_loadu_si512(t.add(32) as *const _);
                _mm512_permutex2var_epi16(t0, idx, t1)
            } else {
                _mm512_permutexvar_epi16(idx, t0)
            };
            acc = _mm512_adds_epu16(acc, v);
        }
    }
    _mm512_storeu_si512(out as *mut _, acc);
    _mm512_cmple_epu16_mask(acc, _mm512_set1_epi16(thr as i16)) as u64
}

#[inline]
#[target_feature(enable = "avx512f,avx512bw")]
unsafe fn permute64_u16(idx: __m512i, t: *const u16) -> __m512i {
    let a = _mm512_loadu_si512(t as *const _);
    let b = _mm512_loadu_si512(t.add(32) as *const _);
    _mm512_permutex2var_epi16(a, idx, b)
}

/// 8-bit lookup of 32 word entries: four 64-entry two-register permutes,
/// then blends on index bits 6 and 7.
#[inline]
#[target_feature(enable = "avx512f,avx512bw")]
pub(crate) unsafe fn lookup256_u16(idx: __m512i, t: *const u16) -> __m512i {
    let r0 = permute64_u16(idx, t);
    let r1 = permute64_u16(idx, t.add(64));
    let r2 = permute64_u16(idx, t.add(128));
    let r3 = permute64_u16(idx, t.add(192));
    let b6 = _mm512_test_epi16_mask(idx, _mm512_set1_epi16(0x40));
    let b7 = _mm512_test_epi16_mask(idx, _mm512_set1_epi16(0x80));
    let low = _mm512_mask_blend_epi16(b6, r0, r1);
    let high = _mm512_mask_blend_epi16(b6, r2, r3);
    _mm512_mask_blend_epi16(b7, low, high)
}

// {8,8} word rows of 32 codes; 256 words per subquantizer table.
#[target_feature(enable = "avx512f,avx512bw")]
pub(crate) unsafe fn split16(block: *const u8, rows: usize, tables: *const u16, bias: u16, thr: u16, out: *mut u8) -> u64 {
    let byte = _mm512_set1_epi16(0xff);
    let mut acc = _mm512_set1_epi16(bias as i16);
    for r in 0..rows {
        let w = _mm512_loadu_si512(block.add(r * 64) as *const _);
        let lo = _mm512_and_si512(w, byte);
        let hi = _mm512_srli_epi16(w, 8);
        acc = _mm512_adds_epu16(acc, lookup256_u16(lo, tables.add(r * 512)));
        acc = _mm512_adds_epu16(acc, lookup256_u16(hi, tables.add(r * 512 + 256)));
    }
    _mm512_storeu_si512(out as *mut _, acc);
    _mm512_cmple_epu16_mask(acc, _mm512_set1_epi16(thr as i16)) as u64
}

/// 8-bit lookup of 64 byte entries: two 128-entry two-register byte
/// permutes, then one blend on index bit 7.
#[inline]
#[target_feature(enable = "avx512f,avx512bw,avx512vbmi")]
pub(crate) unsafe fn lookup256_u8(idx: __m512i, t: *const u8) -> __m512i {
    let a0 = _mm512_loadu_si512(t as *const _);
    let b0 = _mm512_loadu_si512(t.add(64) as *const _);
    let a1 = _mm512_loadu_si512(t.add(128) as *const _);
    let b1 = _mm512_loadu_si512(t.add(192) as *const _);
    let r0 = _mm512_permutex2var_epi8(a0, idx, b0);
    let r1 = _mm512_permutex2var_epi8(a1, idx, b1);
    _mm512_mask_blend_epi8(_mm512_movepi8_mask(idx), r0, r1)
}

// {8} byte rows of 64 codes; 256 bytes per subquantizer table.
#[target_feature(enable = "avx512f,avx512bw,avx512vbmi")]
pub(crate) unsafe fn split8(block: *const u8, rows: usize, tables: *const u8, bias: u8, thr: u8, out: *mut u8) -> u64 {
    let mut acc = _mm512_set1_epi8(bias as i8);
    for r in 0..rows {
        let w = _mm512_loadu_si512(block.add(r * 64) as *const _);
        acc = _mm512_adds_epu8(acc, lookup256_u8(w, tables.add(r * 256)));
    }
    _mm512_storeu_si512(out as *mut _, acc);
    _mm512_cmple_epu8_mask(acc, _mm512_set1_epi8(thr as i8))
}

#[target_feature(enable = "avx512f,avx512bw")]
pub(crate) unsafe fn split_lookup_u16x32(idx: &[u8; 32], table: &[u16; 256]) -> [u16; 32] {
    let wide: [u16; 32] = idx.map(u16::from);
    let v = _mm512_loadu_si512(wide.as_ptr() as *const _);
    let mut out = [0u16; 32];
    _mm512_storeu_si512(out.as_mut_ptr() as *mut _, lookup256_u16(v, table.as_ptr()));
    out
}

#[target_feature(enable = "avx512f,avx512bw,avx512vbmi")]
pub(crate) unsafe fn split_lookup_u8x64(idx: &[u8; 64], table: &[u8; 256]) -> [u8; 64] {
    let v = _mm512_loadu_si512(idx.as_ptr() as *const _);
    let mut out = [0u8; 64];
    _mm512_storeu_si512(out.as_mut_ptr() as *mut _, lookup256_u8(v, table.as_ptr()));
    out
}
