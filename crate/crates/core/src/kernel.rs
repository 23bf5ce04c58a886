//! Kernel CCA: AppGrad run on a pair of Gram matrices in place of the data.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::appgrad::{extract_model, normalize, run_appgrad, Init};
use crate::config::{SolverConfig, SolverKind};
use crate::error::{CcaError, Result};
use crate::matrix::{symmetrize, sym_eigen, DataMatrix};
use crate::metrics::RunReport;
use crate::problem::{CcaProblem, View};
use crate::trace::Evaluation;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Linear,
    /// `exp(-||a - b||^2 / (2 sigma^2))`
    Rbf { sigma: f64 },
    /// `(a^T b + offset)^degree`
    Polynomial { degree: u32, offset: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Rbf { sigma } if sigma > 0.0 && sigma.is_finite() => Ok(()),
            KernelSpec::Polynomial { degree, offset } if degree >= 1 && offset >= 0.0 && offset.is_finite() => Ok(()),
            other => Err(CcaError::InvalidInput(format!("invalid kernel parameters {other:?}"))),
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(u, v)| u * v).sum();
        match *self {
            KernelSpec::Linear => dot,
            KernelSpec::Rbf { sigma } => {
                let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
                (-d2 / (2.0 * sigma * sigma)).exp()
            }
            KernelSpec::Polynomial { degree, offset } => (dot + offset).powi(degree as i32),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Linear => f.write_str("linear"),
            KernelSpec::Rbf { sigma } => write!(f, "rbf:{sigma}"),
            KernelSpec::Polynomial { degree, offset } => write!(f, "poly:{degree}:{offset}"),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = CcaError;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').map(str::trim).collect();
        let bad = || CcaError::Config(format!("bad kernel '{s}' (linear | rbf:<sigma> | poly:<degree>[:<offset>])"));
        let spec = match parts.as_slice() {
            ["linear"] => KernelSpec::Linear,
            ["rbf", sigma] => KernelSpec::Rbf { sigma: sigma.parse().map_err(|_| bad())? },
            ["poly", d] => KernelSpec::Polynomial { degree: d.parse().map_err(|_| bad())?, offset: 0.0 },
            ["poly", d, c] => {
                KernelSpec::Polynomial { degree: d.parse().map_err(|_| bad())?, offset: c.parse().map_err(|_| bad())? }
            }
            _ => return Err(bad()),
        };
        spec.validate().map_err(|_| bad())?;
        Ok(spec)
    }
}

/// Symmetric PSD `n x n` Gram matrix of one view.
#[derive(Debug, Clone)]
pub struct KernelGram {
    values: DMatrix<f64>,
    spec: KernelSpec,
}

impl KernelGram {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn spec(&self) -> KernelSpec {
        self.spec
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// `H K H` with `H = I - 11^T / n`. Off unless requested.
    pub fn centered(&self) -> KernelGram {
        let row_means = self.values.row_mean();
        let col_means = self.values.column_mean();
        let total = self.values.mean();
        let mut c = DMatrix::from_fn(self.n(), self.n(), |i, j| self.values[(i, j)] - col_means[i] - row_means[j] + total);
        symmetrize(&mut c);
        KernelGram { values: c, spec: self.spec }
    }
}

/// Gram matrix `K_ij = k(x_i, x_j)`; forms a dense `n x n` matrix.
pub fn kernel_gram(x: &DataMatrix, spec: KernelSpec) -> Result<KernelGram> {
    spec.validate()?;
    let xd = x.to_dense();
    let inner = &xd * xd.transpose();
    let n = xd.nrows();
    let mut k = match spec {
        KernelSpec::Linear => inner,
        KernelSpec::Rbf { sigma } => {
            let sq = inner.diagonal();
            DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    1.0
                } else {
                    let d2 = (sq[i] + sq[j] - 2.0 * inner[(i, j)]).max(0.0);
                    (-d2 / (2.0 * sigma * sigma)).exp()
                }
            })
        }
        KernelSpec::Polynomial { degree, offset } => inner.map(|v| (v + offset).powi(degree as i32)),
    };
    symmetrize(&mut k);
    if k.iter().any(|v| !v.is_finite()) {
        return Err(CcaError::Numeric("kernel produced non-finite entries".into()));
    }
    let trace = k.trace().abs();
    let eig = sym_eigen(&k);
    if eig.min() < -1e-8 * trace.max(f64::MIN_POSITIVE) {
        return Err(CcaError::Numeric(format!("kernel Gram is not PSD (min eigenvalue {:e})", eig.min())));
    }
    Ok(KernelGram { values: k, spec })
}

#[derive(Debug, Clone)]
pub struct KernelCcaResult {
    /// Dual coefficients, `n x k`, with `W^T K K W / n = I`.
    pub w_x: DMatrix<f64>,
    pub w_y: DMatrix<f64>,
    pub correlations: DVector<f64>,
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub report: RunReport,
}

/// Default ridge for a kernel view: `1e-6 trace(K) / n`.
pub fn default_kernel_lambda(k: &KernelGram) -> f64 {
    1e-6 * k.values.trace() / k.n() as f64
}

/// Kernel CCA through rank-`k` AppGrad with `K_x, K_y` as data. With
/// `lambda = None` each view gets [`default_kernel_lambda`]. The returned
/// coefficients are renormalized against the unregularized `K K / n`.
pub fn kernel_cca(kx: &KernelGram, ky: &KernelGram, k: usize, lambda: Option<f64>, config: &SolverConfig) -> Result<KernelCcaResult> {
    if kx.n() != ky.n() {
        return Err(CcaError::Dimension(format!("kernel Grams cover {} and {} samples", kx.n(), ky.n())));
    }
    let (lx, ly) = match lambda {
        Some(l) => (l, l),
        None => (default_kernel_lambda(kx), default_kernel_lambda(ky)),
    };
    let dx = DataMatrix::dense(kx.values.clone())?;
    let dy = DataMatrix::dense(ky.values.clone())?;
    let problem = CcaProblem::with_view_lambdas(&dx, &dy, lx, ly)?;
    let cfg = SolverConfig { solver: SolverKind::KernelAppGrad, k, kernel: Some(kx.spec), ..config.clone() };
    let eval = Evaluation::new(&dx, &dy).every(config.eval_every.unwrap_or(10));
    let (model, mut report) = run_appgrad(&problem, &cfg, Init::Random, &eval)?;
    report.config.insert("lambda-x".into(), lx.to_string());
    report.config.insert("lambda-y".into(), ly.to_string());

    let plain = CcaProblem::new(&dx, &dy, 0.0)?;
    let (w_x, w_y) = match (normalize(&plain, View::X, &model.phi), normalize(&plain, View::Y, &model.psi)) {
        (Ok(a), Ok(b)) => (a, b),
        // The unregularized Gram is singular along the directions found; keep the regularized normalization.
        _ => (model.phi.clone(), model.psi.clone()),
    };
    let out = extract_model(&plain, &w_x, &w_y, k)?;
    Ok(KernelCcaResult { w_x: out.phi, w_y: out.psi, correlations: out.correlations, lambda_x: lx, lambda_y: ly, report })
}
