use nalgebra::{DMatrix, DVector};

use super::DataMatrix;
use crate::error::{CcaError, Result};

/// Regularized second-moment matrix `X^T X / n + lambda I`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    values: DMatrix<f64>,
    lambda: f64,
}

impl GramMatrix {
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }
}

/// `X^T Y / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCovariance {
    values: DMatrix<f64>,
}

impl CrossCovariance {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }
}

/// Replaces `m` by `(m + m^T) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn gram(x: &DataMatrix, lambda: f64) -> Result<GramMatrix> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(CcaError::InvalidInput(format!("regularization must be finite and >= 0, got {lambda}")));
    }
    check_finite(x)?;
    let n = x.nrows() as f64;
    let mut values = x.tr_self() / n;
    symmetrize(&mut values);
    for i in 0..values.nrows() {
        values[(i, i)] += lambda;
    }
    Ok(GramMatrix { values, lambda })
}

pub fn cross_covariance(x: &DataMatrix, y: &DataMatrix) -> Result<CrossCovariance> {
    if x.nrows() != y.nrows() {
        return Err(CcaError::Dimension(format!(
            "views have {} and {} rows",
            x.nrows(),
            y.nrows()
        )));
    }
    check_finite(x)?;
    check_finite(y)?;
    let n = x.nrows() as f64;
    Ok(CrossCovariance { values: x.tr_other(y) / n })
}

/// `(u^T S u)^{1/2}`. Small negative radicands from roundoff are clamped to zero.
pub fn induced_norm(s: &GramMatrix, u: &DVector<f64>) -> Result<f64> {
    if u.len() != s.dim() {
        return Err(CcaError::Dimension(format!(
            "vector of length {} against a {}x{} Gram matrix",
            u.len(),
            s.dim(),
            s.dim()
        )));
    }
    let q = u.dot(&(s.values() * u));
    let scale = (u.norm_squared() * s.values().amax()).max(1.0);
    if q < -1e-12 * scale {
        return Err(CcaError::Numeric(format!(
            "negative quadratic form {q:e}; the Gram matrix is not positive semidefinite"
        )));
    }
    Ok(q.max(0.0).sqrt())
}

fn check_finite(x: &DataMatrix) -> Result<()> {
    let ok = match x {
        DataMatrix::Dense(m) => m.iter().all(|v| v.is_finite()),
        DataMatrix::Sparse(s) => s.triplets().iter().all(|t| t.2.is_finite()),
    };
    if ok {
        Ok(())
    } else {
        Err(CcaError::InvalidData("data matrix contains non-finite values".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::sym_eigen;

    fn gram_oracle(x: &DMatrix<f64>) -> DMatrix<f64> {
        let (n, p) = x.shape();
        let mut out = DMatrix::zeros(p, p);
        for a in 0..p {
            for b in 0..p {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += x[(i, a)] * x[(i, b)];
                }
                out[(a, b)] = acc / n as f64;
            }
        }
        out
    }

    fn cross_oracle(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
        let n = x.nrows();
        DMatrix::from_fn(x.ncols(), y.ncols(), |a, b| {
            (0..n).map(|i| x[(i, a)] * y[(i, b)]).sum::<f64>() / n as f64
        })
    }

    fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).amax() / b.amax().max(1e-300)
    }

    #[test]
    fn gram_of_identity() {
        let x = DataMatrix::dense(DMatrix::identity(3, 3)).unwrap();
        let g = gram(&x, 0.0).unwrap();
        assert!((g.values() - DMatrix::identity(3, 3) / 3.0).amax() < 1e-15);
    }

    #[test]
    fn gram_of_ones_column_with_ridge() {
        let x = DataMatrix::dense(DMatrix::from_element(4, 1, 1.0)).unwrap();
        let g = gram(&x, 0.1).unwrap();
        assert!((g.values()[(0, 0)] - 1.1).abs() < 1e-15);
    }

    #[test]
    fn gram_matches_double_loop() {
        let raw = DMatrix::from_fn(5, 3, |i, j| (i + j) as f64);
        let x = DataMatrix::dense(raw.clone()).unwrap();
        let g = gram(&x, 0.0).unwrap();
        assert!(rel_err(g.values(), &gram_oracle(&raw)) < 1e-12);
    }

    #[test]
    fn gram_rejects_negative_lambda() {
        let x = DataMatrix::dense(DMatrix::identity(2, 2)).unwrap();
        assert!(gram(&x, -1.0).is_err());
    }

    #[test]
    fn cross_covariance_identity_and_orthogonal() {
        let i2 = DataMatrix::dense(DMatrix::identity(2, 2)).unwrap();
        let c = cross_covariance(&i2, &i2).unwrap();
        assert!((c.values() - DMatrix::identity(2, 2) * 0.5).amax() < 1e-15);

        let q = DMatrix::from_fn(6, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 + 0.3 * i as f64).qr().q();
        let x = DataMatrix::dense(q.columns(0, 2).into_owned()).unwrap();
        let y = DataMatrix::dense(q.columns(2, 2).into_owned()).unwrap();
        assert!(cross_covariance(&x, &y).unwrap().values().amax() < 1e-12);
    }

    #[test]
    fn cross_covariance_matches_double_loop() {
        let xr = DMatrix::from_fn(6, 2, |i, j| ((i * 13 + j * 7) % 11) as f64 / 3.0 - 1.0);
        let yr = DMatrix::from_fn(6, 3, |i, j| ((i * 5 + j * 17) % 7) as f64 / 2.0 - 0.7);
        let x = DataMatrix::dense(xr.clone()).unwrap();
        let y = DataMatrix::dense(yr.clone()).unwrap();
        let c = cross_covariance(&x, &y).unwrap();
        assert!(rel_err(c.values(), &cross_oracle(&xr, &yr)) < 1e-12);
        let z = DataMatrix::dense(DMatrix::zeros(5, 2)).unwrap();
        assert!(matches!(cross_covariance(&x, &z), Err(CcaError::Dimension(_))));
    }

    #[test]
    fn induced_norm_examples() {
        let i2 = DataMatrix::dense(DMatrix::identity(2, 2) * 2f64.sqrt()).unwrap();
        let s = gram(&i2, 0.0).unwrap();
        let u = DVector::from_vec(vec![3.0, 4.0]);
        assert!((induced_norm(&s, &u).unwrap() - 5.0).abs() < 1e-14);
        assert_eq!(induced_norm(&s, &DVector::zeros(2)).unwrap(), 0.0);
        assert!(induced_norm(&s, &DVector::zeros(3)).is_err());

        let raw = DMatrix::from_fn(8, 3, |i, j| ((i * 3 + j * 5) % 7) as f64 - 2.5 + 0.1 * j as f64);
        let x = DataMatrix::dense(raw.clone()).unwrap();
        let u = DVector::from_vec(vec![0.3, -1.2, 0.8]);
        let direct = (&raw * &u).norm() / 8f64.sqrt();
        let via = induced_norm(&gram(&x, 0.0).unwrap(), &u).unwrap();
        assert!((via - direct).abs() <= 1e-12 * direct);
    }

    #[test]
    fn gram_is_psd_for_rank_deficient_input() {
        let raw = DMatrix::from_fn(4, 6, |i, j| ((i + 1) * (j + 2)) as f64 % 5.0);
        let g = gram(&DataMatrix::dense(raw).unwrap(), 0.0).unwrap();
        let eig = sym_eigen(g.values());
        assert!(eig.values.iter().all(|&v| v >= -1e-10));
    }
}
