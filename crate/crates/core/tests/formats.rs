mod common;

use pqscan::index::{spec_hash, IvfIndex};
use pqscan::layout::{read_database, write_database, PackedList, PackingScheme};
use pqscan::quantizer::{Code, CodeStructure, Codebook, KMeansConfig, PqSpec};
use pqscan::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn spec(s: &str, dim: usize) -> PqSpec {
    PqSpec::from_structure(dim, &s.parse::<CodeStructure>().unwrap()).unwrap()
}

fn spec_bytes(spec: &PqSpec) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend((spec.total_dims() as u32).to_le_bytes());
    b.extend((spec.num_groups() as u32).to_le_bytes());
    for g in spec.groups() {
        b.extend((g.len() as u32).to_le_bytes());
        b.extend(g);
    }
    b.extend((spec.num_subquantizers() as u32).to_le_bytes());
    for &d in spec.dim_alloc() {
        b.extend((d as u32).to_le_bytes());
    }
    b
}

#[test]
fn codebook_container_layout() {
    let (data, _) = common::clustered(600, 0, 12, 4, 1);
    let s = spec("3x{6,5,5}", 12);
    let cb = Codebook::train(&data, &s, &KMeansConfig::default()).unwrap();
    let bytes = cb.to_bytes();
    assert_eq!(&bytes[..4], b"QADC");
    assert_eq!(u32_at(&bytes, 4), 1);
    let header = spec_bytes(&s);
    assert_eq!(&bytes[8..8 + header.len()], &header[..]);
    let floats: usize = (0..s.num_subquantizers()).map(|j| s.num_centroids(j) * s.dim_alloc()[j]).sum();
    assert_eq!(bytes.len(), 8 + header.len() + floats * 4);
    let first = f32::from_le_bytes(bytes[8 + header.len()..12 + header.len()].try_into().unwrap());
    assert_eq!(first, cb.centroid(0, 0)[0]);
    assert_eq!(Codebook::read_from(&mut bytes.as_slice()).unwrap().to_bytes(), bytes);
}

#[test]
fn spec_hash_is_sha256_prefix() {
    for (st, dim) in [("16x{4,4}", 128), ("12x{6,6,4}", 96), ("8x{8}", 64)] {
        let s = spec(st, dim);
        let digest = Sha256::digest(spec_bytes(&s));
        assert_eq!(spec_hash(&s), u64::from_le_bytes(digest[..8].try_into().unwrap()));
    }
}

/// Row-contiguous blocks of little-endian words, padding all ones.
fn oracle_block(codes: &[Code], pattern: &[u8], groups: usize, block_len: usize, word_bytes: usize) -> Vec<u8> {
    let mut out = vec![0xffu8; groups * block_len * word_bytes];
    for (pos, c) in codes.iter().enumerate() {
        for row in 0..groups {
            let mut w = 0u32;
            let mut shift = 0;
            for (k, &b) in pattern.iter().enumerate() {
                w |= (c.0[row * pattern.len() + k] as u32) << shift;
                shift += b;
            }
            let at = (row * block_len + pos) * word_bytes;
            out[at..at + word_bytes].copy_from_slice(&w.to_le_bytes()[..word_bytes]);
        }
    }
    out
}

#[test]
fn database_container_layout() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (st, bl, wb) in [("16x{4,4}", 16, 1), ("12x{6,6,4}", 32, 2), ("8x{8}", 64, 1), ("8x{8,8}", 32, 2)] {
        let s = spec(st, 2 * st.parse::<CodeStructure>().unwrap().code_bits());
        let scheme = PackingScheme::default_for(&s).unwrap();
        assert_eq!(scheme.block_len(), bl);
        let n = 2 * bl + 3;
        let codes: Vec<Code> = (0..n)
            .map(|_| Code(s.widths().iter().map(|&b| rng.random_range(0..1u16 << b) as u8).collect()))
            .collect();
        let list = PackedList::from_codes(&codes, &scheme).unwrap();
        let mut bytes = Vec::new();
        write_database(&mut bytes, spec_hash(&s), &scheme, std::slice::from_ref(&list)).unwrap();

        assert_eq!(&bytes[..4], b"QADB");
        assert_eq!(u32_at(&bytes, 4), 1);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), spec_hash(&s));
        assert_eq!(bytes[16] as usize, wb * 8);
        assert_eq!(u16::from_le_bytes([bytes[17], bytes[18]]) as usize, bl);
        let g = s.pattern().len();
        assert_eq!(bytes[19] as usize, g);
        assert_eq!(&bytes[20..20 + g], s.pattern());
        let mut at = 20 + g;
        assert_eq!(u32_at(&bytes, at) as usize, s.num_groups());
        assert_eq!(u32_at(&bytes, at + 4), 1);
        assert_eq!(u32_at(&bytes, at + 8) as usize, n);
        at += 12;
        let mut expect = Vec::new();
        for chunk in codes.chunks(bl) {
            expect.extend(oracle_block(chunk, s.pattern(), s.num_groups(), bl, wb));
        }
        assert_eq!(&bytes[at..], &expect[..]);

        let db = read_database(&mut bytes.as_slice()).unwrap();
        assert_eq!(db.lists[0].codes(&db.scheme), codes);
    }
}

#[test]
fn index_file_rejects_damage() {
    let (data, _) = common::clustered(800, 0, 8, 4, 3);
    let s = spec("4x{4,4}", 8);
    let cb = Codebook::train(&data, &s, &KMeansConfig::default()).unwrap();
    let index = IvfIndex::build_flat(&data, cb).unwrap();
    let bytes = index.to_bytes();
    assert_eq!(&bytes[..4], b"QIVF");
    assert_eq!(IvfIndex::read_from(&mut bytes.as_slice()).unwrap().to_bytes(), bytes);

    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(IvfIndex::read_from(&mut bad.as_slice()), Err(Error::Corruption(_))));
    assert!(IvfIndex::read_from(&mut &bytes[..bytes.len() - 1]).is_err());

    // The database spec hash follows its magic and version.
    let db = bytes.windows(4).rposition(|w| w == b"QADB").unwrap();
    let mut bad = bytes.clone();
    bad[db + 8] ^= 1;
    assert!(matches!(IvfIndex::read_from(&mut bad.as_slice()), Err(Error::SpecMismatch(_))));
}
