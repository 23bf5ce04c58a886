use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::symmetrize;
use crate::error::{CcaError, Result};

/// Default eigenvalue floor for inverse square roots, relative to the largest eigenvalue.
pub const DEFAULT_RELATIVE_FLOOR: f64 = 1e-10;

const SYMMETRY_TOL: f64 = 1e-10;

/// Symmetric eigendecomposition with eigenvalues sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn max(&self) -> f64 {
        self.values[0]
    }

    pub fn min(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// `U f(D) U^T`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.values[j]);
        }
        let mut out = scaled * self.vectors.transpose();
        symmetrize(&mut out);
        out
    }
}

/// Eigendecomposition of a symmetric matrix (only the lower triangle is read).
pub fn sym_eigen(m: &DMatrix<f64>) -> SymEigen {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    SymEigen { values, vectors }
}

pub fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(CcaError::InvalidInput(format!("expected a square matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(CcaError::InvalidInput(format!("matrix is not symmetric (max asymmetry {asym:e})")));
    }
    Ok(())
}

/// `U max(D, floor)^{-1/2} U^T` for symmetric `m = U D U^T`.
pub fn sym_inv_sqrt(m: &DMatrix<f64>, floor: f64) -> Result<DMatrix<f64>> {
    check_symmetric(m)?;
    if !(floor > 0.0 && floor.is_finite()) {
        return Err(CcaError::InvalidInput(format!("eigenvalue floor must be positive, got {floor}")));
    }
    let eig = sym_eigen(m);
    Ok(eig.reconstruct_with(|d| 1.0 / d.max(floor).sqrt()))
}

/// [`sym_inv_sqrt`] with the floor set to `DEFAULT_RELATIVE_FLOOR` times the largest eigenvalue.
pub fn sym_inv_sqrt_relative(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(m)?;
    let eig = sym_eigen(m);
    let floor = (DEFAULT_RELATIVE_FLOOR * eig.max()).max(f64::MIN_POSITIVE);
    Ok(eig.reconstruct_with(|d| 1.0 / d.max(floor).sqrt()))
}
