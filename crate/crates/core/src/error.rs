use thiserror::Error;

/// Errors raised across the crate.
///
/// The variants map one-to-one onto the failure classes the CLI reports
/// through its exit codes (see [`NpivError::exit_code`]).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NpivError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("empirical Gram matrix is rank deficient (min eigenvalue {min_eig:e})")]
    RankDeficient { min_eig: f64 },
    #[error("ill-posed denominator matrix (min eigenvalue {denom_min_eig:e}, sigma_hat_jk {sigma_hat_jk:e})")]
    IllPosed { sigma_hat_jk: f64, denom_min_eig: f64 },
    #[error("i/o error: {0}")]
    Io(String),
}

impl NpivError {
    /// Process exit code for this error class: 2 config/schema, 3 ill-posedness, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            NpivError::Config(_)
            | NpivError::Schema(_)
            | NpivError::Contract(_)
            | NpivError::Domain(_)
            | NpivError::Io(_) => 2,
            NpivError::IllPosed { .. } => 3,
            NpivError::Numeric(_) | NpivError::RankDeficient { .. } => 4,
        }
    }
}

impl From<std::io::Error> for NpivError {
    fn from(e: std::io::Error) -> Self {
        NpivError::Io(e.to_string())
    }
}

impl From<csv::Error> for NpivError {
    fn from(e: csv::Error) -> Self {
        NpivError::Schema(e.to_string())
    }
}

impl From<serde_json::Error> for NpivError {
    fn from(e: serde_json::Error) -> Self {
        NpivError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, NpivError>;
