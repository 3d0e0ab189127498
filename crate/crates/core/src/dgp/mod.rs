//! Synthetic NPIV and regression designs with known truth and operator spectrum.

mod model;
mod noise;

pub use model::{
    algebraic_mixing_condition, ar_copula_regressors, cosine_series, normal_cdf, sample_iid,
    sample_mixing, Dependence, Design, DgpConfig, NpivDgp, MIN_DENSITY, TAIL_TOLERANCE,
};
pub use noise::{draw_noise, NoiseFamily, NoiseSpec, NOISE_STREAM};
