//! Sieve measures of ill-posedness and their relation to the operator spectrum.

mod measures;
mod profile;

pub use measures::{
    default_population_rule, population_s, sigma_jk_from_s, tau_22, RESOLUTION_TOL,
};
pub use profile::{IllPosednessProfile, ProfileKind};
