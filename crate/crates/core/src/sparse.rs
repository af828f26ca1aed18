//! Sampled entries of a `d1 × d2` matrix in sorted coordinate form.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::opcount;

/// The index set Ω: coordinates sorted by `(row, col)` plus a row-pointer index.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePattern {
    d1: usize,
    d2: usize,
    rows: Vec<u32>,
    cols: Vec<u32>,
    row_ptr: Vec<usize>,
}

impl SparsePattern {
    /// Builds the pattern from sorted, duplicate-free, in-range coordinates.
    fn from_sorted(d1: usize, d2: usize, rows: Vec<u32>, cols: Vec<u32>) -> Self {
        let mut row_ptr = vec![0usize; d1 + 1];
        for &i in &rows {
            row_ptr[i as usize + 1] += 1;
        }
        for i in 0..d1 {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparsePattern { d1, d2, rows, cols, row_ptr }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.d1, self.d2)
    }

    pub fn nnz(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[u32] {
        &self.rows
    }

    pub fn cols(&self) -> &[u32] {
        &self.cols
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows.iter().zip(&self.cols).map(|(&i, &j)| (i as usize, j as usize))
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        if i >= self.d1 {
            return false;
        }
        let span = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        span.binary_search(&(j as u32)).is_ok()
    }

    /// Values of `A Bᵀ` at every index in the pattern, for `A: d1 × k`, `B: d2 × k`.
    pub fn sample_product(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
        assert_eq!(a.nrows(), self.d1, "left factor rows");
        assert_eq!(b.nrows(), self.d2, "right factor rows");
        assert_eq!(a.ncols(), b.ncols(), "inner dimensions");
        let k = a.ncols();
        opcount::add(self.nnz() * k + (self.d1 + self.d2) * k);
        // transposed copies make each row a contiguous column
        let at = a.transpose();
        let bt = b.transpose();
        let (ad, bd) = (at.as_slice(), bt.as_slice());
        self.iter()
            .map(|(i, j)| {
                let x = &ad[i * k..(i + 1) * k];
                let y = &bd[j * k..(j + 1) * k];
                x.iter().zip(y).map(|(p, q)| p * q).sum()
            })
            .collect()
    }

    /// `Σ_c A[:, c] B[:, c]ᵀ` sampled on the pattern for several factor pairs at once.
    pub fn sample_sum(&self, pairs: &[(&DMatrix<f64>, &DMatrix<f64>)]) -> Vec<f64> {
        let mut out = vec![0.0; self.nnz()];
        for (a, b) in pairs {
            for (o, v) in out.iter_mut().zip(self.sample_product(a, b)) {
                *o += v;
            }
        }
        out
    }
}

/// A matrix known only on an index set: `P_Ω(W)` with `W` implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledMatrix {
    pattern: Arc<SparsePattern>,
    values: Vec<f64>,
}

impl SampledMatrix {
    /// Validates, sorts and stores `(row, col, value)` triplets.
    pub fn from_triplets(d1: usize, d2: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if d1 > u32::MAX as usize || d2 > u32::MAX as usize {
            return Err(Error::InvalidSample("dimensions exceed u32 index range".into()));
        }
        for &(i, j, v) in &entries {
            if i >= d1 || j >= d2 {
                return Err(Error::InvalidSample(format!("index ({i}, {j}) out of range for {d1}×{d2}")));
            }
            if !v.is_finite() {
                return Err(Error::InvalidSample(format!("non-finite value at ({i}, {j})")));
            }
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        if let Some(w) = entries.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::InvalidSample(format!("duplicate index ({}, {})", w[0].0, w[0].1)));
        }
        let rows = entries.iter().map(|e| e.0 as u32).collect();
        let cols = entries.iter().map(|e| e.1 as u32).collect();
        let values = entries.iter().map(|e| e.2).collect();
        let pattern = Arc::new(SparsePattern::from_sorted(d1, d2, rows, cols));
        Ok(SampledMatrix { pattern, values })
    }

    /// New values on an existing pattern.
    pub fn with_values(pattern: Arc<SparsePattern>, values: Vec<f64>) -> Self {
        assert_eq!(pattern.nnz(), values.len(), "value count must match pattern");
        SampledMatrix { pattern, values }
    }

    pub fn zeros(pattern: Arc<SparsePattern>) -> Self {
        let n = pattern.nnz();
        SampledMatrix { pattern, values: vec![0.0; n] }
    }

    pub fn pattern(&self) -> &Arc<SparsePattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        self.pattern.shape()
    }

    pub fn nnz(&self) -> usize {
        self.pattern.nnz()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.pattern.iter().zip(&self.values).map(|((i, j), &v)| (i, j, v))
    }

    /// `S M` for dense `M: d2 × k`.
    pub fn mul_dense(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let (d1, d2) = self.shape();
        assert_eq!(m.nrows(), d2, "S·M inner dimension");
        let k = m.ncols();
        opcount::add(self.nnz() * k + (d1 + d2) * k);
        let mt = m.transpose();
        let src = mt.as_slice();
        let mut out = vec![0.0; d1 * k];
        for ((i, j), &v) in self.pattern.iter().zip(&self.values) {
            let o = &mut out[i * k..(i + 1) * k];
            for (x, y) in o.iter_mut().zip(&src[j * k..(j + 1) * k]) {
                *x += v * y;
            }
        }
        DMatrix::from_row_slice(d1, k, &out)
    }

    /// `Sᵀ M` for dense `M: d1 × k`.
    pub fn tr_mul_dense(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let (d1, d2) = self.shape();
        assert_eq!(m.nrows(), d1, "Sᵀ·M inner dimension");
        let k = m.ncols();
        opcount::add(self.nnz() * k + (d1 + d2) * k);
        let mt = m.transpose();
        let src = mt.as_slice();
        let mut out = vec![0.0; d2 * k];
        for ((i, j), &v) in self.pattern.iter().zip(&self.values) {
            let o = &mut out[j * k..(j + 1) * k];
            for (x, y) in o.iter_mut().zip(&src[i * k..(i + 1) * k]) {
                *x += v * y;
            }
        }
        DMatrix::from_row_slice(d2, k, &out)
    }

    /// Dense `d1 × d2` copy with zeros off the pattern. Test and small-problem use only.
    pub fn to_dense(&self) -> DMatrix<f64> {
        opcount::note_ambient_dense();
        let (d1, d2) = self.shape();
        let mut out = DMatrix::zeros(d1, d2);
        for (i, j, v) in self.iter() {
            out[(i, j)] = v;
        }
        out
    }

    /// Frobenius norm of the sampled values.
    pub fn norm(&self) -> f64 {
        crate::linalg::pairwise_sum(&self.values.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn sample() -> SampledMatrix {
        SampledMatrix::from_triplets(3, 4, vec![(2, 1, 5.0), (0, 3, 1.0), (0, 0, 2.0), (1, 2, -1.0)]).unwrap()
    }

    #[test]
    fn triplets_are_sorted() {
        let s = sample();
        let got: Vec<_> = s.iter().collect();
        assert_eq!(got, vec![(0, 0, 2.0), (0, 3, 1.0), (1, 2, -1.0), (2, 1, 5.0)]);
        assert_eq!(s.pattern().row_ptr(), &[0, 2, 3, 4]);
        assert!(s.pattern().contains(1, 2));
        assert!(!s.pattern().contains(1, 3));
    }

    #[test]
    fn rejects_bad_triplets() {
        assert!(SampledMatrix::from_triplets(2, 2, vec![(2, 0, 1.0)]).is_err());
        assert!(SampledMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 0, 2.0)]).is_err());
        assert!(SampledMatrix::from_triplets(2, 2, vec![(0, 0, f64::NAN)]).is_err());
    }

    #[test]
    fn products_match_dense() {
        let mut g = rng::stream(11, 0);
        let s = sample();
        let dense = s.to_dense();
        let m = rng::gaussian(&mut g, 4, 3);
        assert!((s.mul_dense(&m) - &dense * &m).amax() < 1e-14);
        let m = rng::gaussian(&mut g, 3, 2);
        assert!((s.tr_mul_dense(&m) - dense.transpose() * &m).amax() < 1e-14);
    }

    #[test]
    fn sampling_matches_dense_product() {
        let mut g = rng::stream(12, 0);
        let a = rng::gaussian(&mut g, 3, 2);
        let b = rng::gaussian(&mut g, 4, 2);
        let full = &a * b.transpose();
        let s = sample();
        let vals = s.pattern().sample_product(&a, &b);
        for ((i, j), v) in s.pattern().iter().zip(vals) {
            assert!((full[(i, j)] - v).abs() < 1e-14);
        }
    }

    #[test]
    fn empty_pattern() {
        let s = SampledMatrix::from_triplets(3, 3, vec![]).unwrap();
        let a = DMatrix::from_element(3, 2, 1.0);
        assert!(s.pattern().sample_product(&a, &a).is_empty());
        assert_eq!(s.mul_dense(&a), DMatrix::zeros(3, 2));
    }
}
