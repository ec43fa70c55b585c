//! `.fvecs`, `.bvecs` and `.ivecs` files: each record is a little-endian
//! `i32` dimension followed by that many `f32`, `u8` or `i32` components.

use std::fs;
use std::io::Write;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};

use crate::error::{Error, Result};
use crate::vectors::VectorSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementType {
    F32,
    U8,
    I32,
}

impl ElementType {
    pub fn size(self) -> usize {
        match self {
            ElementType::U8 => 1,
            ElementType::F32 | ElementType::I32 => 4,
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("fvecs") => Ok(ElementType::F32),
            Some("bvecs") => Ok(ElementType::U8),
            Some("ivecs") => Ok(ElementType::I32),
            _ => Err(Error::input(format!("{}: expected a .fvecs, .bvecs or .ivecs file", path.display()))),
        }
    }
}

/// Validates the record structure and returns `(dim, count)`, reading at
/// most `limit` records.
fn layout(bytes: &[u8], elem: ElementType, limit: Option<usize>) -> Result<(usize, usize)> {
    if bytes.is_empty() {
        return Ok((0, 0));
    }
    if bytes.len() < 4 {
        return Err(Error::input("truncated vector file"));
    }
    let dim = LittleEndian::read_i32(&bytes[..4]);
    if dim <= 0 {
        return Err(Error::input(format!("invalid record dimension {dim}")));
    }
    let dim = dim as usize;
    let record = 4 + dim * elem.size();
    if bytes.len() % record != 0 {
        return Err(Error::input(format!(
            "file size {} is not a multiple of the record size {record} (dimension {dim})",
            bytes.len()
        )));
    }
    let count = (bytes.len() / record).min(limit.unwrap_or(usize::MAX));
    for i in 0..count {
        let d = LittleEndian::read_i32(&bytes[i * record..i * record + 4]);
        if d as usize != dim {
            return Err(Error::input(format!("record {i} has dimension {d}, expected {dim}")));
        }
    }
    Ok((dim, count))
}

/// Float vectors from raw `.fvecs` or `.bvecs` bytes.
pub fn parse_vectors(bytes: &[u8], elem: ElementType, limit: Option<usize>) -> Result<VectorSet> {
    let (dim, count) = layout(bytes, elem, limit)?;
    if count == 0 {
        return Err(Error::input("vector file is empty"));
    }
    let record = 4 + dim * elem.size();
    let mut data = Vec::with_capacity(dim * count);
    for r in bytes.chunks_exact(record).take(count) {
        let body = &r[4..];
        match elem {
            ElementType::F32 => data.extend(body.chunks_exact(4).map(LittleEndian::read_f32)),
            ElementType::U8 => data.extend(body.iter().map(|&b| b as f32)),
            ElementType::I32 => data.extend(body.chunks_exact(4).map(|c| LittleEndian::read_i32(c) as f32)),
        }
    }
    VectorSet::from_flat(dim, data)
}

pub fn parse_ivecs(bytes: &[u8], limit: Option<usize>) -> Result<Vec<Vec<i32>>> {
    let (dim, count) = layout(bytes, ElementType::I32, limit)?;
    let record = 4 + dim * 4;
    Ok(bytes
        .chunks_exact(record.max(1))
        .take(count)
        .map(|r| r[4..].chunks_exact(4).map(LittleEndian::read_i32).collect())
        .collect())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::Io(std::io::Error::new(e.kind(), format!("{}: file not found", path.display())))
        } else {
            Error::Io(e)
        }
    })
}

/// Reads `.fvecs` or `.bvecs`, chosen by extension.
pub fn read_vectors(path: &Path, limit: Option<usize>) -> Result<VectorSet> {
    let elem = ElementType::from_path(path)?;
    if elem == ElementType::I32 {
        return Err(Error::input(format!("{}: expected float or byte vectors", path.display())));
    }
    parse_vectors(&read(path)?, elem, limit)
}

pub fn read_ivecs(path: &Path, limit: Option<usize>) -> Result<Vec<Vec<i32>>> {
    parse_ivecs(&read(path)?, limit)
}

pub fn write_fvecs<W: Write>(w: &mut W, rows: &[impl AsRef<[f32]>]) -> Result<()> {
    let mut buf = Vec::new();
    for r in rows {
        let r = r.as_ref();
        buf.extend_from_slice(&(r.len() as i32).to_le_bytes());
        for x in r {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn write_bvecs<W: Write>(w: &mut W, rows: &[impl AsRef<[u8]>]) -> Result<()> {
    for r in rows {
        let r = r.as_ref();
        w.write_all(&(r.len() as i32).to_le_bytes())?;
        w.write_all(r)?;
    }
    Ok(())
}

pub fn write_ivecs<W: Write>(w: &mut W, rows: &[impl AsRef<[i32]>]) -> Result<()> {
    let mut buf = Vec::new();
    for r in rows {
        let r = r.as_ref();
        buf.extend_from_slice(&(r.len() as i32).to_le_bytes());
        for x in r {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn write_vectors(path: &Path, set: &VectorSet) -> Result<()> {
    let rows: Vec<&[f32]> = set.iter().collect();
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    write_fvecs(&mut f, &rows)?;
    f.flush()?;
    Ok(())
}
