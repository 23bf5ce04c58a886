//! Randomized truncated SVD (range finder with subspace iteration).

use nalgebra::{DMatrix, DVector};

use super::DataMatrix;
use crate::error::{CcaError, Result};
use crate::random;

pub const DEFAULT_OVERSAMPLE: usize = 10;
pub const DEFAULT_POWER_ITERS: usize = 2;

/// Anything that can apply itself and its transpose to a block of vectors.
pub trait LinearOperator {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `A * B`
    fn apply(&self, b: &DMatrix<f64>) -> DMatrix<f64>;
    /// `A^T * B`
    fn apply_t(&self, b: &DMatrix<f64>) -> DMatrix<f64>;
}

impl LinearOperator for DMatrix<f64> {
    fn nrows(&self) -> usize {
        self.nrows()
    }
    fn ncols(&self) -> usize {
        self.ncols()
    }
    fn apply(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self * b
    }
    fn apply_t(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.tr_mul(b)
    }
}

impl LinearOperator for DataMatrix {
    fn nrows(&self) -> usize {
        DataMatrix::nrows(self)
    }
    fn ncols(&self) -> usize {
        DataMatrix::ncols(self)
    }
    fn apply(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.mul(b)
    }
    fn apply_t(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.tr_mul(b)
    }
}

/// Rank-`k` factorization `A ~ U diag(D) V^T`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= self.singular_values[j];
        }
        us * self.v.transpose()
    }
}

fn orthonormal_basis(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

/// Randomized SVD of `a`, deterministic for a fixed seed.
///
/// The sketch width is `k + oversample`, capped at `min(rows, cols)`; at the
/// cap the sketch spans the full range and the result is exact up to roundoff.
pub fn randomized_svd<A: LinearOperator + ?Sized>(
    a: &A,
    k: usize,
    oversample: usize,
    power_iters: usize,
    seed: u64,
) -> Result<SvdResult> {
    let (rows, cols) = (a.nrows(), a.ncols());
    let max_rank = rows.min(cols);
    if k == 0 || k > max_rank {
        return Err(CcaError::Dimension(format!(
            "rank {k} requested from a {rows}x{cols} matrix (must be in 1..={max_rank})"
        )));
    }
    let width = (k + oversample).min(max_rank);
    let mut rng = random::rng(seed, random::streams::RSVD);
    let omega = random::gaussian_matrix(&mut rng, cols, width);
    let mut q = orthonormal_basis(a.apply(&omega));
    for _ in 0..power_iters {
        let z = orthonormal_basis(a.apply_t(&q));
        q = orthonormal_basis(a.apply(&z));
    }
    // B = Q^T A, held transposed as A^T Q (cols x width).
    let bt = a.apply_t(&q);
    let svd = bt.transpose().svd(true, true);
    let ub = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let u = &q * ub.columns(0, k);
    let v = vt.rows(0, k).transpose();
    let singular_values = DVector::from_iterator(k, svd.singular_values.iter().take(k).copied());
    Ok(SvdResult { u, singular_values, v })
}

/// Full thin SVD sorted by nonincreasing singular value.
pub fn dense_svd(a: &DMatrix<f64>) -> SvdResult {
    let svd = a.clone().svd(true, true);
    SvdResult {
        u: svd.u.expect("requested U"),
        singular_values: svd.singular_values,
        v: svd.v_t.expect("requested V^T").transpose(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_frob(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn diag_spectrum_truncation() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let r = randomized_svd(&a, 2, DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS, 7).unwrap();
        assert!((r.singular_values[0] - 3.0).abs() < 1e-12);
        assert!((r.singular_values[1] - 2.0).abs() < 1e-12);
        let err = rel_frob(&r.reconstruct(), &a);
        assert!((err - 1.0 / 14f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn exact_rank_two_is_recovered() {
        let mut rng = random::rng(11, 0);
        let a = random::gaussian_matrix(&mut rng, 30, 2) * random::gaussian_matrix(&mut rng, 2, 20);
        let r = randomized_svd(&a, 2, 5, 2, 3).unwrap();
        assert!(rel_frob(&r.reconstruct(), &a) <= 1e-8);
        assert!((r.u.tr_mul(&r.u) - DMatrix::identity(2, 2)).amax() < 1e-8);
        assert!((r.v.tr_mul(&r.v) - DMatrix::identity(2, 2)).amax() < 1e-8);
    }

    #[test]
    fn rank_out_of_range_is_rejected() {
        let a = DMatrix::<f64>::identity(3, 4);
        assert!(matches!(randomized_svd(&a, 4, 0, 0, 1), Err(CcaError::Dimension(_))));
        assert!(randomized_svd(&a, 0, 0, 0, 1).is_err());
    }

    #[test]
    fn random_gaussian_top_five_against_dense_oracle() {
        let mut rng = random::rng(21, 0);
        let a = random::gaussian_matrix(&mut rng, 50, 40);
        let exact = dense_svd(&a);
        // Sketch width 40 spans the whole column space of a flat Gaussian spectrum.
        let r = randomized_svd(&a, 5, 35, 3, 4).unwrap();
        for i in 0..5 {
            assert!((r.singular_values[i] - exact.singular_values[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn decaying_spectrum_at_default_sketch() {
        let mut rng = random::rng(8, 0);
        let u = random::random_orthogonal(&mut rng, 50).columns(0, 40).into_owned();
        let v = random::random_orthogonal(&mut rng, 40);
        let s = DVector::from_fn(40, |i, _| 10.0 * 0.6f64.powi(i as i32));
        let a = &u * DMatrix::from_diagonal(&s) * v.transpose();
        let r = randomized_svd(&a, 5, DEFAULT_OVERSAMPLE, 3, 4).unwrap();
        for i in 0..5 {
            assert!((r.singular_values[i] - s[i]).abs() < 1e-6 * s[0]);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let mut rng = random::rng(5, 0);
        let a = random::gaussian_matrix(&mut rng, 40, 25);
        let r1 = randomized_svd(&a, 3, 4, 1, 99).unwrap();
        let r2 = randomized_svd(&a, 3, 4, 1, 99).unwrap();
        assert_eq!(r1.u, r2.u);
        assert_eq!(r1.singular_values, r2.singular_values);
    }
}
