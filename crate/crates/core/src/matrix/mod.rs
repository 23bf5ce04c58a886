//! Dense and sparse data matrices and the small dense kernels the solvers share.

mod data;
mod ops;
mod rsvd;
mod spectral;

pub use data::{CsrMatrix, DataMatrix};
pub use ops::{cross_covariance, gram, induced_norm, symmetrize, CrossCovariance, GramMatrix};
pub use rsvd::{dense_svd, randomized_svd, LinearOperator, SvdResult, DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS};
pub use spectral::{
    check_symmetric, sym_eigen, sym_inv_sqrt, sym_inv_sqrt_relative, SymEigen, DEFAULT_RELATIVE_FLOOR,
};
