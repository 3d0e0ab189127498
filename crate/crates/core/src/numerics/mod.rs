//! Dense linear algebra and quadrature kernels.

mod linalg;
mod mat;
mod quadrature;
mod regress;

pub use linalg::{
    inv_sqrt_psd, min_eig_sym, pinv, pinv_with_rank, solve, spectral_norm, svd, sym_eigen,
    SvdResult, SymEigen, DEFAULT_PINV_REL_TOL,
};
pub use mat::Mat;
pub use quadrature::{gauss_legendre, gauss_legendre_on_breaks, QuadratureRule};
pub use regress::{weighted_least_squares, weighted_slope, LinearFit};
