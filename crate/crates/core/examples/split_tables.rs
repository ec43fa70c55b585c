//! An 8-bit lookup assembled from narrower shuffles.

use pqscan::scan::{simd_split_lookup_u16, split_op_counts, split_table_lookup, Capabilities};

fn main() {
    let table: [u16; 256] = std::array::from_fn(|i| (i as u16).wrapping_mul(2654) ^ 0x5a5a);
    let indices: Vec<u8> = (0..32).map(|i| (i * 37 % 256) as u8).collect();

    for bits in 4..=8 {
        let (shuffles, blends) = split_op_counts(bits);
        let out = split_table_lookup(&indices, &table, bits);
        assert!(indices.iter().zip(&out).all(|(&i, &v)| table[i as usize] == v));
        println!("{bits}-bit native width: {shuffles} shuffles and {blends} blends per lookup");
    }

    let caps = Capabilities::detect();
    let idx: [u8; 32] = std::array::from_fn(|l| indices[l]);
    match simd_split_lookup_u16(&caps, &idx, &table) {
        Some(out) => {
            assert!(idx.iter().zip(&out).all(|(&i, &v)| table[i as usize] == v));
            println!("hardware split-table-16 matches the flat table");
        }
        None => println!("no hardware split-table-16 on this host"),
    }
}
