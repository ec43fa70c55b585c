//! Dense row-major float vector storage.

use crate::error::{Error, Result};

/// A set of equal-length `f32` vectors stored contiguously.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VectorSet {
    dim: usize,
    data: Vec<f32>,
}

impl VectorSet {
    pub fn new(dim: usize) -> Self {
        Self { dim, data: Vec::new() }
    }

    pub fn from_flat(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("vector dimension must be positive"));
        }
        if data.len() % dim != 0 {
            return Err(Error::input(format!(
                "{} values do not form whole vectors of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut set = Self::new(dim);
        for r in rows {
            set.push(r.as_ref())?;
        }
        Ok(set)
    }

    pub fn push(&mut self, v: &[f32]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: v.len() });
        }
        self.data.extend_from_slice(v);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn as_flat(&self) -> &[f32] {
        &self.data
    }

    /// Rows `idx` in the given order.
    pub fn select(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self { dim: self.dim, data }
    }

    /// Contiguous copy of the column range `cols` of every row.
    pub fn columns(&self, cols: std::ops::Range<usize>) -> Self {
        let width = cols.len();
        let mut data = Vec::with_capacity(self.len() * width);
        for r in self.iter() {
            data.extend_from_slice(&r[cols.clone()]);
        }
        Self { dim: width, data }
    }

    pub fn ensure_finite(&self) -> Result<()> {
        match self.data.iter().position(|x| !x.is_finite()) {
            Some(p) => Err(Error::input(format!(
                "non-finite value in vector {} component {}",
                p / self.dim,
                p % self.dim
            ))),
            None => Ok(()),
        }
    }
}

/// Squared Euclidean distance.
#[inline]
pub fn l2_sq(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0f32; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..8 {
            let d = x[k] - y[k];
            acc[k] += d * d;
        }
    }
    let mut tail = 0f32;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        let d = x - y;
        tail += d * d;
    }
    acc.iter().sum::<f32>() + tail
}

/// Index and distance of the nearest row of `centroids` (flat, `dim` wide);
/// ties resolve to the lowest index.
#[inline]
pub fn nearest(v: &[f32], centroids: &[f32], dim: usize) -> (usize, f32) {
    let mut best = (0, f32::INFINITY);
    for (i, c) in centroids.chunks_exact(dim).enumerate() {
        let d = l2_sq(v, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l2_matches_naive() {
        let a: Vec<f32> = (0..19).map(|i| i as f32 * 0.5).collect();
        let b: Vec<f32> = (0..19).map(|i| (i * i) as f32 * 0.1).collect();
        let naive: f32 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        assert!((l2_sq(&a, &b) - naive).abs() <= 1e-4 * naive);
    }

    #[test]
    fn nearest_breaks_ties_low() {
        let c = [0.0, 2.0, 4.0];
        assert_eq!(nearest(&[1.0], &c, 1).0, 0);
        assert_eq!(nearest(&[3.0], &c, 1).0, 1);
    }

    #[test]
    fn shape_checks() {
        assert!(VectorSet::from_flat(3, vec![0.0; 7]).is_err());
        let mut s = VectorSet::new(2);
        assert!(s.push(&[1.0]).is_err());
        s.push(&[1.0, f32::NAN]).unwrap();
        assert!(s.ensure_finite().is_err());
    }
}
