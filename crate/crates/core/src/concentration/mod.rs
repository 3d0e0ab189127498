//! Matrix Bernstein tail bounds for independent and β-mixing sums, and simulation studies
//! of the empirical-Gram identifiability statistic.

mod bounds;
mod ensemble;
mod study;

pub use bounds::{
    beta_tropp_tail, default_block_length, gaussian_ar_beta, tropp_tail, wilson_interval,
    BoundParams, Z_99, Z_VIOLATION,
};
pub use ensemble::{
    empirical_gram_deviation, ident_stat, rayleigh_brute_force, rayleigh_deviation,
    simulate_norms, tail_check, EnsembleKind, EnsembleSpec, GramEnsemble, TailCheck, TailPoint,
};
pub use study::{
    quartiles, scaling_study, ConcentrationReport, ExponentFit, ScalingCell,
};
