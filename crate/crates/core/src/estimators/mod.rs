//! Sieve NPIV and series least-squares estimators.

mod metrics;
mod npiv;
mod sample;

pub use metrics::{default_grid_per_dim, l2_distance, sup_norm_distance, unit_grid};
pub use npiv::{
    empirical_projection, empirical_projection_with, fit_sieve_ls, fit_sieve_ls_with,
    fit_sieve_npiv, fit_sieve_npiv_with, orthonormal_design, Diagnostics, FitMode, FitOptions, FitReport,
    NpivFit, NpivSolver, NpivSystem, Orthonormalization, ESTIMATOR_PINV_REL_TOL,
};
pub use sample::Sample;
