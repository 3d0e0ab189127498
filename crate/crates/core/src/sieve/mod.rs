//! B-spline, wavelet and cosine sieve spaces on [0, 1]^d.

mod basis;
mod bspline;
mod spec;
mod wavelet;

pub use basis::{
    cosine_eval_into, gram_matrix, orthonormalize, tensor_eval, weighted_gram, zeta0, Basis,
    BasisHandle, DensityGrid, Gram, Measure, MeasureKind, RANK_WARNING_EIG,
    WAVELET_QUAD_SUBINTERVALS,
};
pub use bspline::{bspline_eval, make_knots, KnotVector};
pub use spec::{AxisSpec, SieveSpec};
pub use wavelet::{daubechies_filter, quadrature_mirror, wavelet_eval, CascadeTable, WaveletBasis, CASCADE_LEVELS};
