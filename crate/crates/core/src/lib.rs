pub mod concentration;
pub mod dgp;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod illposedness;
pub mod numerics;
pub mod sieve;

pub use error::{NpivError, Result};
