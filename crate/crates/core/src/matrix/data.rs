use nalgebra::{DMatrix, DVector};

use crate::error::{CcaError, Result};

/// Compressed sparse row storage. Rows are samples, so minibatch row
/// selection and per-sample accumulation are cheap.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a CSR matrix from `(row, col, value)` triplets in any order.
    ///
    /// Indices must be in range, values finite, and each `(row, col)` pair
    /// may appear at most once.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if nrows == 0 || ncols == 0 {
            return Err(CcaError::InvalidData(format!(
                "sparse matrix must have nonzero dimensions, got {nrows}x{ncols}"
            )));
        }
        let mut entries = triplets.to_vec();
        for &(r, c, v) in &entries {
            if r >= nrows || c >= ncols {
                return Err(CcaError::InvalidData(format!(
                    "entry ({r}, {c}) out of bounds for a {nrows}x{ncols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(CcaError::InvalidData(format!("non-finite value at ({r}, {c})")));
            }
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(CcaError::InvalidData(format!(
                    "duplicate entry at ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }
        let mut row_ptr = vec![0usize; nrows + 1];
        for &(r, _, _) in &entries {
            row_ptr[r + 1] += 1;
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = entries.iter().map(|e| e.1).collect();
        let values = entries.iter().map(|e| e.2).collect();
        Ok(Self { nrows, ncols, row_ptr, col_idx, values })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored `(col, value)` pairs of one row, sorted by column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    /// All stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.nrows).flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v))).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                out[(i, j)] = v;
            }
        }
        out
    }

    fn mul_dense(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let k = b.ncols();
        let mut out = DMatrix::zeros(self.nrows, k);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                for c in 0..k {
                    out[(i, c)] += v * b[(j, c)];
                }
            }
        }
        out
    }

    fn tr_mul_dense(&self, d: &DMatrix<f64>) -> DMatrix<f64> {
        let k = d.ncols();
        let mut out = DMatrix::zeros(self.ncols, k);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                for c in 0..k {
                    out[(j, c)] += v * d[(i, c)];
                }
            }
        }
        out
    }

    fn select_rows(&self, rows: &[usize]) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for &r in rows {
            for (j, v) in self.row(r) {
                col_idx.push(j);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self { nrows: rows.len(), ncols: self.ncols, row_ptr, col_idx, values }
    }
}

/// An `n x p` observation matrix: rows are samples, columns are features.
#[derive(Debug, Clone, PartialEq)]
pub enum DataMatrix {
    Dense(DMatrix<f64>),
    Sparse(CsrMatrix),
}

impl DataMatrix {
    /// Wraps a dense matrix after checking dimensions and finiteness.
    pub fn dense(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(CcaError::InvalidData(format!(
                "data matrix must have nonzero dimensions, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % values.nrows(), pos / values.nrows());
            return Err(CcaError::InvalidData(format!("non-finite value at ({r}, {c})")));
        }
        Ok(Self::Dense(values))
    }

    pub fn from_row_slice(nrows: usize, ncols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != nrows * ncols {
            return Err(CcaError::Dimension(format!(
                "expected {} values for a {nrows}x{ncols} matrix, got {}",
                nrows * ncols,
                values.len()
            )));
        }
        Self::dense(DMatrix::from_row_slice(nrows, ncols, values))
    }

    pub fn sparse(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        Ok(Self::Sparse(CsrMatrix::from_triplets(nrows, ncols, triplets)?))
    }

    pub fn nrows(&self) -> usize {
        match self {
            Self::Dense(m) => m.nrows(),
            Self::Sparse(s) => s.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Self::Dense(m) => m.ncols(),
            Self::Sparse(s) => s.ncols(),
        }
    }

    /// Number of stored values; `n * p` for dense storage.
    pub fn nnz(&self) -> usize {
        match self {
            Self::Dense(m) => m.len(),
            Self::Sparse(s) => s.nnz(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, Self::Sparse(_))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Self::Dense(m) => m.clone(),
            Self::Sparse(s) => s.to_dense(),
        }
    }

    /// `X * B` for a dense `p x k` right factor.
    pub fn mul(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(self.ncols(), b.nrows(), "X * B: inner dimensions differ");
        match self {
            Self::Dense(m) => m * b,
            Self::Sparse(s) => s.mul_dense(b),
        }
    }

    /// `X^T * D` for a dense `n x k` right factor.
    pub fn tr_mul(&self, d: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(self.nrows(), d.nrows(), "X^T * D: inner dimensions differ");
        match self {
            Self::Dense(m) => m.tr_mul(d),
            Self::Sparse(s) => s.tr_mul_dense(d),
        }
    }

    /// Restriction to the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> DataMatrix {
        match self {
            Self::Dense(m) => {
                let p = m.ncols();
                Self::Dense(DMatrix::from_fn(rows.len(), p, |r, c| m[(rows[r], c)]))
            }
            Self::Sparse(s) => Self::Sparse(s.select_rows(rows)),
        }
    }

    /// Per-column sums of squares, `diag(X^T X)`.
    pub fn column_sq_sums(&self) -> DVector<f64> {
        match self {
            Self::Dense(m) => DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.norm_squared())),
            Self::Sparse(s) => {
                let mut out = DVector::zeros(s.ncols());
                for i in 0..s.nrows() {
                    for (j, v) in s.row(i) {
                        out[j] += v * v;
                    }
                }
                out
            }
        }
    }

    /// Unscaled `X^T X`, accumulated over stored entries only for sparse input.
    pub(crate) fn tr_self(&self) -> DMatrix<f64> {
        match self {
            Self::Dense(m) => m.tr_mul(m),
            Self::Sparse(s) => {
                let p = s.ncols();
                let mut out = DMatrix::zeros(p, p);
                for i in 0..s.nrows() {
                    let row: Vec<(usize, f64)> = s.row(i).collect();
                    for &(a, va) in &row {
                        for &(b, vb) in &row {
                            out[(a, b)] += va * vb;
                        }
                    }
                }
                out
            }
        }
    }

    /// Unscaled `X^T Y` for any storage combination.
    pub(crate) fn tr_other(&self, other: &DataMatrix) -> DMatrix<f64> {
        match (self, other) {
            (Self::Dense(a), Self::Dense(b)) => a.tr_mul(b),
            (Self::Sparse(a), Self::Dense(b)) => a.tr_mul_dense(b),
            (Self::Dense(a), Self::Sparse(b)) => b.tr_mul_dense(a).transpose(),
            (Self::Sparse(a), Self::Sparse(b)) => {
                let mut out = DMatrix::zeros(a.ncols(), b.ncols());
                for i in 0..a.nrows() {
                    for (ja, va) in a.row(i) {
                        for (jb, vb) in b.row(i) {
                            out[(ja, jb)] += va * vb;
                        }
                    }
                }
                out
            }
        }
    }
}

impl From<CsrMatrix> for DataMatrix {
    fn from(s: CsrMatrix) -> Self {
        Self::Sparse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_triplets() -> Vec<(usize, usize, f64)> {
        vec![(0, 0, 1.0), (0, 2, -2.0), (1, 1, 3.0), (3, 0, 0.5), (3, 2, 4.0)]
    }

    #[test]
    fn csr_rejects_duplicates_and_out_of_range() {
        let dup = [(0, 0, 1.0), (0, 0, 2.0)];
        assert!(CsrMatrix::from_triplets(2, 2, &dup).is_err());
        assert!(CsrMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
        assert!(CsrMatrix::from_triplets(2, 2, &[(0, 0, f64::NAN)]).is_err());
        assert!(CsrMatrix::from_triplets(0, 2, &[]).is_err());
    }

    #[test]
    fn sparse_products_match_dense() {
        let s = DataMatrix::sparse(4, 3, &sample_triplets()).unwrap();
        let d = DataMatrix::dense(s.to_dense()).unwrap();
        let b = DMatrix::from_fn(3, 2, |i, j| (i as f64) - 0.5 * j as f64 + 0.25);
        let e = DMatrix::from_fn(4, 2, |i, j| (i * j) as f64 + 1.0);
        assert!((s.mul(&b) - d.mul(&b)).norm() < 1e-14);
        assert!((s.tr_mul(&e) - d.tr_mul(&e)).norm() < 1e-14);
        assert!((s.tr_self() - d.tr_self()).norm() < 1e-14);
        assert_eq!(s.nnz(), 5);
    }

    #[test]
    fn select_rows_keeps_order() {
        let s = DataMatrix::sparse(4, 3, &sample_triplets()).unwrap();
        let sub = s.select_rows(&[3, 0]);
        let dense = sub.to_dense();
        assert_eq!(dense[(0, 2)], 4.0);
        assert_eq!(dense[(1, 2)], -2.0);
        let d = DataMatrix::dense(s.to_dense()).unwrap().select_rows(&[3, 0]);
        assert_eq!(d.to_dense(), dense);
    }

    #[test]
    fn dense_rejects_non_finite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, f64::INFINITY, 0.0, 1.0]);
        assert!(matches!(DataMatrix::dense(m), Err(CcaError::InvalidData(_))));
    }
}
