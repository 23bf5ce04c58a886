//! Approximate-whitening baselines: no whitening (NW), diagonal whitening
//! (DW) and CCA restricted to leading principal components (PCA-CCA).

use nalgebra::{DMatrix, DVector};

use crate::error::{CcaError, Result};
use crate::matrix::{randomized_svd, DataMatrix, LinearOperator, DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS};
use crate::reference::{spectral_cca, CcaModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RsvdParams {
    pub oversample: usize,
    pub power_iters: usize,
    pub seed: u64,
}

impl Default for RsvdParams {
    fn default() -> Self {
        Self { oversample: DEFAULT_OVERSAMPLE, power_iters: DEFAULT_POWER_ITERS, seed: 0 }
    }
}

/// `D_x X^T Y D_y / n` as an operator, never formed.
struct CrossOperator<'a> {
    x: &'a DataMatrix,
    y: &'a DataMatrix,
    dx: Option<DVector<f64>>,
    dy: Option<DVector<f64>>,
}

fn scale_rows(d: &Option<DVector<f64>>, mut b: DMatrix<f64>) -> DMatrix<f64> {
    if let Some(d) = d {
        for (i, mut row) in b.row_iter_mut().enumerate() {
            row *= d[i];
        }
    }
    b
}

impl LinearOperator for CrossOperator<'_> {
    fn nrows(&self) -> usize {
        self.x.ncols()
    }
    fn ncols(&self) -> usize {
        self.y.ncols()
    }
    fn apply(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let yb = self.y.mul(&scale_rows(&self.dy, b.clone()));
        scale_rows(&self.dx, self.x.tr_mul(&yb)) / self.x.nrows() as f64
    }
    fn apply_t(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let xb = self.x.mul(&scale_rows(&self.dx, b.clone()));
        scale_rows(&self.dy, self.y.tr_mul(&xb)) / self.x.nrows() as f64
    }
}

fn check_views(x: &DataMatrix, y: &DataMatrix, k: usize) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(CcaError::Dimension(format!("views have {} and {} rows", x.nrows(), y.nrows())));
    }
    let max = x.ncols().min(y.ncols());
    if k == 0 || k > max {
        return Err(CcaError::Dimension(format!("requested {k} components, views allow 1..={max}")));
    }
    Ok(())
}

/// Per-pair sample correlations of `X phi_i` and `Y psi_i`.
fn pair_correlations(x: &DataMatrix, y: &DataMatrix, phi: &DMatrix<f64>, psi: &DMatrix<f64>) -> DVector<f64> {
    let (px, py) = (x.mul(phi), y.mul(psi));
    DVector::from_fn(phi.ncols(), |j, _| {
        let (a, b) = (px.column(j), py.column(j));
        let denom = a.norm() * b.norm();
        if denom > 0.0 {
            a.dot(&b) / denom
        } else {
            0.0
        }
    })
}

fn unwhitened_model(x: &DataMatrix, y: &DataMatrix, phi: DMatrix<f64>, psi: DMatrix<f64>) -> CcaModel {
    let correlations = pair_correlations(x, y, &phi, &psi);
    let mut model = CcaModel { phi, psi, correlations, unwhitened: true };
    model.fix_signs();
    model
}

/// Top-`k` singular pairs of the unwhitened cross-covariance `X^T Y / n`.
/// Columns are ordered by singular value; `correlations` holds each pair's sample correlation.
pub fn nw_cca(x: &DataMatrix, y: &DataMatrix, k: usize, params: RsvdParams) -> Result<CcaModel> {
    check_views(x, y, k)?;
    let op = CrossOperator { x, y, dx: None, dy: None };
    let svd = randomized_svd(&op, k, params.oversample, params.power_iters, params.seed)?;
    Ok(unwhitened_model(x, y, svd.u, svd.v))
}

fn inverse_root_diagonal(x: &DataMatrix, lambda: f64, view: &str) -> Result<DVector<f64>> {
    let n = x.nrows() as f64;
    let d = x.column_sq_sums() / n;
    if let Some(j) = d.iter().position(|&v| !(v + lambda > 0.0)) {
        return Err(CcaError::Singular(format!("{view} column {j} has zero variance; use a positive regularization")));
    }
    Ok(d.map(|v| 1.0 / (v + lambda).sqrt()))
}

/// NW on columns rescaled by `diag(S)^{-1/2}`, mapped back through the same scaling.
pub fn dw_cca(x: &DataMatrix, y: &DataMatrix, k: usize, lambda: f64, params: RsvdParams) -> Result<CcaModel> {
    check_views(x, y, k)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(CcaError::InvalidInput(format!("regularization must be finite and >= 0, got {lambda}")));
    }
    let dx = inverse_root_diagonal(x, lambda, "x")?;
    let dy = inverse_root_diagonal(y, lambda, "y")?;
    let op = CrossOperator { x, y, dx: Some(dx.clone()), dy: Some(dy.clone()) };
    let svd = randomized_svd(&op, k, params.oversample, params.power_iters, params.seed)?;
    let phi = scale_rows(&Some(dx), svd.u);
    let psi = scale_rows(&Some(dy), svd.v);
    Ok(unwhitened_model(x, y, phi, psi))
}

/// Leading right singular vectors of a view (uncentered principal directions).
#[derive(Debug, Clone)]
pub struct PcaProjection {
    pub basis: DMatrix<f64>,
    pub m: usize,
}

impl PcaProjection {
    /// Drops directions whose singular value is below `1e-12` of the largest.
    pub fn fit(x: &DataMatrix, m: usize, params: RsvdParams) -> Result<Self> {
        let svd = randomized_svd(x, m, params.oversample, params.power_iters, params.seed)?;
        let smax = svd.singular_values.max();
        let keep = svd.singular_values.iter().filter(|&&s| s > 1e-12 * smax).count();
        Ok(Self { basis: svd.v.columns(0, keep).into_owned(), m: keep })
    }

    pub fn project(&self, x: &DataMatrix) -> DMatrix<f64> {
        x.mul(&self.basis)
    }
}

/// Exact CCA on the `m` leading principal components of each view, mapped back to feature space.
pub fn pca_cca(x: &DataMatrix, y: &DataMatrix, k: usize, m: usize, lambda: f64, params: RsvdParams) -> Result<CcaModel> {
    check_views(x, y, k)?;
    let max = x.ncols().min(y.ncols()).min(x.nrows());
    if m < k || m > max {
        return Err(CcaError::Dimension(format!("PCA dimension {m} must be in {k}..={max}")));
    }
    let px = PcaProjection::fit(x, m, params)?;
    let py = PcaProjection::fit(y, m, params)?;
    if px.m < k || py.m < k {
        return Err(CcaError::Degenerate(format!(
            "only {} / {} principal directions are nonzero, fewer than k = {k}",
            px.m, py.m
        )));
    }
    let ux = DataMatrix::dense(px.project(x))?;
    let uy = DataMatrix::dense(py.project(y))?;
    let inner = spectral_cca(&ux, &uy, k, lambda)?;
    let mut model = CcaModel {
        phi: &px.basis * inner.phi,
        psi: &py.basis * inner.psi,
        correlations: inner.correlations,
        unwhitened: false,
    };
    model.fix_signs();
    Ok(model)
}
