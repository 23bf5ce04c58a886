//! Exact solvers: whitened SVD, QR whitening, alternating least squares, and
//! the unaccelerated projected gradient step kept as a negative control.

use nalgebra::{DMatrix, DVector};

use crate::error::{CcaError, Result};
use crate::matrix::{dense_svd, sym_eigen, DataMatrix, GramMatrix};
use crate::problem::{CcaProblem, View};

/// Canonical directions for both views, columns ordered by nonincreasing correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct CcaModel {
    pub phi: DMatrix<f64>,
    pub psi: DMatrix<f64>,
    pub correlations: DVector<f64>,
    /// True when the columns are not normalized in the induced metric (NW baseline).
    pub unwhitened: bool,
}

impl CcaModel {
    pub fn rank(&self) -> usize {
        self.correlations.len()
    }

    pub fn truncate(&self, k: usize) -> CcaModel {
        let k = k.min(self.rank());
        CcaModel {
            phi: self.phi.columns(0, k).into_owned(),
            psi: self.psi.columns(0, k).into_owned(),
            correlations: self.correlations.rows(0, k).into_owned(),
            unwhitened: self.unwhitened,
        }
    }

    /// Flips each column pair so the largest-magnitude entry of `phi_i` is positive.
    pub fn fix_signs(&mut self) {
        for j in 0..self.phi.ncols() {
            let col = self.phi.column(j);
            let mut best = 0;
            for i in 1..col.len() {
                if col[i].abs() > col[best].abs() {
                    best = i;
                }
            }
            if col.len() > 0 && col[best] < 0.0 {
                self.phi.column_mut(j).neg_mut();
                self.psi.column_mut(j).neg_mut();
            }
        }
    }
}

/// Relative conditioning below which an unregularized covariance is treated as singular.
const SINGULAR_RATIO: f64 = 1e-12;

fn check_rank(problem: &CcaProblem, k: usize) -> Result<()> {
    let max = problem.dim(View::X).min(problem.dim(View::Y));
    if k == 0 || k > max {
        return Err(CcaError::Dimension(format!("requested {k} components, views allow 1..={max}")));
    }
    Ok(())
}

fn whitener(s: &GramMatrix, view: &str) -> Result<DMatrix<f64>> {
    let eig = sym_eigen(s.values());
    if !(eig.min() > SINGULAR_RATIO * eig.max().max(f64::MIN_POSITIVE)) {
        return Err(CcaError::Singular(format!(
            "{view} covariance has eigenvalues in [{:e}, {:e}]; use a positive regularization",
            eig.min(),
            eig.max()
        )));
    }
    Ok(eig.reconstruct_with(|d| 1.0 / d.sqrt()))
}

/// Exact top-`k` CCA from the SVD of `S_x^{-1/2} S_xy S_y^{-1/2}`.
pub fn spectral_cca(x: &DataMatrix, y: &DataMatrix, k: usize, lambda: f64) -> Result<CcaModel> {
    spectral_cca_problem(&CcaProblem::new(x, y, lambda)?, k)
}

pub fn spectral_cca_problem(problem: &CcaProblem, k: usize) -> Result<CcaModel> {
    check_rank(problem, k)?;
    let wx = whitener(&problem.gram(View::X)?, "x")?;
    let wy = whitener(&problem.gram(View::Y)?, "y")?;
    let t = &wx * problem.cross()?.values() * &wy;
    let svd = dense_svd(&t);
    let mut model = CcaModel {
        phi: wx * svd.u.columns(0, k),
        psi: wy * svd.v.columns(0, k),
        correlations: svd.singular_values.rows(0, k).into_owned(),
        unwhitened: false,
    };
    model.fix_signs();
    Ok(model)
}

/// Returns `(Q_x, R)` with `Q_x = X R^{-1}` and `R^T R = X^T X + n lambda I`.
fn qr_whiten(x: &DMatrix<f64>, lambda: f64, view: &str) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n, p) = x.shape();
    let aug = if lambda > 0.0 {
        let mut a = DMatrix::zeros(n + p, p);
        a.rows_mut(0, n).copy_from(x);
        a.rows_mut(n, p).fill_diagonal((n as f64 * lambda).sqrt());
        a
    } else {
        x.clone()
    };
    if aug.nrows() < p {
        return Err(CcaError::Singular(format!("{view} has {n} rows but {p} features and no regularization")));
    }
    let qr = aug.qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..p).map(|i| r[(i, i)].abs()).collect();
    let rmax = diag.iter().copied().fold(0.0, f64::max);
    if diag.iter().any(|&d| !(d > 1e-6 * rmax)) {
        return Err(CcaError::Singular(format!("{view} is numerically rank deficient; use a positive regularization")));
    }
    let q = qr.q().rows(0, n).into_owned();
    Ok((q, r))
}

/// Exact top-`k` CCA by orthogonalizing each view; dense data only.
pub fn qr_cca(x: &DataMatrix, y: &DataMatrix, k: usize, lambda: f64) -> Result<CcaModel> {
    let problem = CcaProblem::new(x, y, lambda)?;
    check_rank(&problem, k)?;
    let (DataMatrix::Dense(xd), DataMatrix::Dense(yd)) = (x, y) else {
        return Err(CcaError::InvalidInput("QR whitening requires dense views".into()));
    };
    let (qx, rx) = qr_whiten(xd, lambda, "x")?;
    let (qy, ry) = qr_whiten(yd, lambda, "y")?;
    let svd = dense_svd(&qx.tr_mul(&qy));
    let scale = (x.nrows() as f64).sqrt();
    let solve = |r: &DMatrix<f64>, u: DMatrix<f64>| {
        r.solve_upper_triangular(&u)
            .map(|m| m * scale)
            .ok_or_else(|| CcaError::Singular("triangular factor is singular".into()))
    };
    let mut model = CcaModel {
        phi: solve(&rx, svd.u.columns(0, k).into_owned())?,
        psi: solve(&ry, svd.v.columns(0, k).into_owned())?,
        correlations: svd.singular_values.rows(0, k).map(|c| c.min(1.0)),
        unwhitened: false,
    };
    model.fix_signs();
    Ok(model)
}

#[derive(Debug, Clone, Copy)]
pub struct AlsOptions {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for AlsOptions {
    fn default() -> Self {
        Self { max_iters: 1000, tol: 1e-8 }
    }
}

#[derive(Debug, Clone)]
pub struct AlsOutcome {
    pub phi: DVector<f64>,
    pub psi: DVector<f64>,
    pub correlation: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Leading canonical pair by alternating exact least-squares solves.
/// Both updates at step `t` read the iterates of step `t - 1`.
pub fn als_cca(problem: &CcaProblem, phi0: &DVector<f64>, psi0: &DVector<f64>, options: AlsOptions) -> Result<AlsOutcome> {
    if phi0.len() != problem.dim(View::X) || psi0.len() != problem.dim(View::Y) {
        return Err(CcaError::Dimension("initial vectors do not match the views".into()));
    }
    let sx = problem.gram(View::X)?;
    let sy = problem.gram(View::Y)?;
    whitener(&sx, "x")?;
    whitener(&sy, "y")?;
    let cx = sx.values().clone().cholesky().ok_or_else(|| CcaError::Singular("x covariance".into()))?;
    let cy = sy.values().clone().cholesky().ok_or_else(|| CcaError::Singular("y covariance".into()))?;
    let sxy = problem.cross()?.into_inner();
    let norm = |s: &GramMatrix, v: &DVector<f64>| v.dot(&(s.values() * v)).max(0.0).sqrt();

    let mut phi = problem.normalize_vector(View::X, phi0)?;
    let mut psi = problem.normalize_vector(View::Y, psi0)?;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iters {
        let a = cx.solve(&(&sxy * &psi));
        let b = cy.solve(&sxy.tr_mul(&phi));
        let (na, nb) = (norm(&sx, &a), norm(&sy, &b));
        iterations += 1;
        if na <= 1e-12 || nb <= 1e-12 {
            // The views are uncorrelated along the current iterate; nothing further to extract.
            converged = true;
            break;
        }
        let (phi_next, psi_next) = (a / na, b / nb);
        // Jacobi ordering can flip each view's sign on alternate steps.
        let dx = norm(&sx, &(&phi_next - &phi)).min(norm(&sx, &(&phi_next + &phi)));
        let dy = norm(&sy, &(&psi_next - &psi)).min(norm(&sy, &(&psi_next + &psi)));
        let change = dx.max(dy);
        phi = phi_next;
        psi = psi_next;
        if change < options.tol {
            converged = true;
            break;
        }
    }
    let mut correlation = phi.dot(&(&sxy * &psi));
    if correlation < 0.0 {
        psi.neg_mut();
        correlation = -correlation;
    }
    Ok(AlsOutcome { phi, psi, correlation, iterations, converged })
}

/// One plain projected gradient step on the normalized pair, renormalized in
/// each view's induced metric. Converges far more slowly than the
/// decoupled-iterate scheme and is kept for comparison.
pub fn naive_gradient_step(
    problem: &CcaProblem,
    phi: &DVector<f64>,
    psi: &DVector<f64>,
    eta_x: f64,
    eta_y: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let as_block = |v: &DVector<f64>| DMatrix::from_column_slice(v.len(), 1, v.as_slice());
    let (a, b) = (as_block(phi), as_block(psi));
    let gx = problem.gradient(View::X, &a, &b);
    let gy = problem.gradient(View::Y, &b, &a);
    let phi_next = phi - gx.column(0) * eta_x;
    let psi_next = psi - gy.column(0) * eta_y;
    Ok((problem.normalize_vector(View::X, &phi_next)?, problem.normalize_vector(View::Y, &psi_next)?))
}
