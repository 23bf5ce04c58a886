//! A regularized two-view problem and the matrix-free products the iterative solvers use.

use nalgebra::{DMatrix, DVector};

use crate::error::{CcaError, Result};
use crate::matrix::{cross_covariance, gram, symmetrize, CrossCovariance, DataMatrix, GramMatrix};
use crate::random;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    X,
    Y,
}

impl View {
    pub fn other(self) -> View {
        match self {
            View::X => View::Y,
            View::Y => View::X,
        }
    }
}

/// Two views sharing rows, with per-view ridge terms `S_x = X^T X / n + lambda_x I`.
#[derive(Debug, Clone, Copy)]
pub struct CcaProblem<'a> {
    x: &'a DataMatrix,
    y: &'a DataMatrix,
    lambda_x: f64,
    lambda_y: f64,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(CcaError::InvalidInput(format!("regularization must be finite and >= 0, got {lambda}")));
    }
    Ok(())
}

impl<'a> CcaProblem<'a> {
    pub fn new(x: &'a DataMatrix, y: &'a DataMatrix, lambda: f64) -> Result<Self> {
        Self::with_view_lambdas(x, y, lambda, lambda)
    }

    pub fn with_view_lambdas(x: &'a DataMatrix, y: &'a DataMatrix, lambda_x: f64, lambda_y: f64) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(CcaError::Dimension(format!("views have {} and {} rows", x.nrows(), y.nrows())));
        }
        check_lambda(lambda_x)?;
        check_lambda(lambda_y)?;
        Ok(Self { x, y, lambda_x, lambda_y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn x(&self) -> &'a DataMatrix {
        self.x
    }

    pub fn y(&self) -> &'a DataMatrix {
        self.y
    }

    pub fn data(&self, view: View) -> &'a DataMatrix {
        match view {
            View::X => self.x,
            View::Y => self.y,
        }
    }

    pub fn lambda(&self, view: View) -> f64 {
        match view {
            View::X => self.lambda_x,
            View::Y => self.lambda_y,
        }
    }

    pub fn dim(&self, view: View) -> usize {
        self.data(view).ncols()
    }

    pub fn gram(&self, view: View) -> Result<GramMatrix> {
        gram(self.data(view), self.lambda(view))
    }

    pub fn cross(&self) -> Result<CrossCovariance> {
        cross_covariance(self.x, self.y)
    }

    /// `B^T S B` for a direction block `b`, computed through the projection `X B`.
    pub fn projected_gram(&self, view: View, b: &DMatrix<f64>) -> DMatrix<f64> {
        let proj = self.data(view).mul(b);
        self.projected_gram_from(view, b, &proj)
    }

    pub(crate) fn projected_gram_from(&self, view: View, b: &DMatrix<f64>, proj: &DMatrix<f64>) -> DMatrix<f64> {
        let mut g = proj.tr_mul(proj) / self.n() as f64;
        let lambda = self.lambda(view);
        if lambda > 0.0 {
            g += b.tr_mul(b) * lambda;
        }
        symmetrize(&mut g);
        g
    }

    /// Gradient of `(1/2n)||X A - Y B||^2 + (lambda/2)||A||^2` in `A`, i.e. `S_x A - S_xy B`.
    pub fn gradient(&self, view: View, own: &DMatrix<f64>, partner: &DMatrix<f64>) -> DMatrix<f64> {
        let data = self.data(view);
        let residual = data.mul(own) - self.data(view.other()).mul(partner);
        let mut g = data.tr_mul(&residual) / self.n() as f64;
        let lambda = self.lambda(view);
        if lambda > 0.0 {
            g += own * lambda;
        }
        g
    }

    /// `A^T S_xy B`.
    pub fn projected_cross(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.x.mul(a).tr_mul(&self.y.mul(b)) / self.n() as f64
    }

    /// Largest eigenvalue of `S` for one view, by power iteration on `X^T X / n + lambda I`.
    pub fn estimate_smoothness(&self, view: View, iters: usize, seed: u64) -> f64 {
        let data = self.data(view);
        let p = data.ncols();
        let mut r = random::rng(seed, random::streams::POWER);
        let mut v = random::gaussian_matrix(&mut r, p, 1);
        let mut estimate = 0.0;
        for _ in 0..iters.max(1) {
            let norm = v.norm();
            if norm == 0.0 {
                break;
            }
            v /= norm;
            let xv = data.mul(&v);
            let w = data.tr_mul(&xv) / self.n() as f64 + &v * self.lambda(view);
            estimate = v.dot(&w);
            v = w;
        }
        estimate.max(self.lambda(view))
    }

    /// Cost model: one product of a view (or its transpose) with a `p x k` block.
    pub fn product_flops(&self, view: View, k: usize) -> f64 {
        2.0 * self.data(view).nnz() as f64 * k as f64
    }

    /// Both views' blocks `X A` and `Y B`.
    pub fn project(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.x.mul(a), self.y.mul(b))
    }

    /// Rescales `v` to unit induced norm.
    pub fn normalize_vector(&self, view: View, v: &DVector<f64>) -> Result<DVector<f64>> {
        let m = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        let q = self.projected_gram(view, &m)[(0, 0)];
        if !q.is_finite() {
            return Err(CcaError::Diverged("non-finite induced norm".into()));
        }
        if q <= 1e-28 {
            return Err(CcaError::Degenerate("vector has zero induced norm".into()));
        }
        Ok(v / q.sqrt())
    }
}
