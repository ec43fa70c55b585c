//! Packs codes into words and transposes them into a block.

use pqscan::layout::{pack_group, transpose_block, untranspose_block, PackingScheme};
use pqscan::quantizer::{Code, PqSpec};

fn main() -> pqscan::Result<()> {
    let spec = PqSpec::from_structure(12, &"6x{6,6,4}".parse()?)?;
    let scheme = PackingScheme::default_for(&spec)?;
    println!(
        "{}: {}-bit words, {} groups, blocks of {} codes ({} bytes)",
        spec.structure(),
        scheme.word_width().bits(),
        scheme.num_groups(),
        scheme.block_len(),
        scheme.block_bytes()
    );

    let w = pack_group(&[0x2a, 0x15, 0x9], scheme.group_layout())?;
    println!("group (42, 21, 9) packs to {w:#06x}");

    let codes: Vec<Code> = (0..5u8).map(|i| Code(vec![i, 63 - i, i % 16, i + 1, i + 2, 15 - i])).collect();
    let block = transpose_block(&codes, &scheme)?;
    for row in 0..scheme.num_groups() {
        let words: Vec<String> = (0..8).map(|p| format!("{:04x}", block.word(&scheme, row, p))).collect();
        println!("row {row}: {} ...", words.join(" "));
    }
    assert_eq!(untranspose_block(block.as_ref(), &scheme), codes);
    Ok(())
}
