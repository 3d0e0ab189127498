//! Monte Carlo rate studies for the sieve estimators.

mod config;
pub mod presets;
mod rates;
mod sweeps;

pub use config::{
    default_targets, resize_basis, theory_slope, Metric, RateStudyConfig, SlopeAxis, SlopeTarget,
    TuningRule, MIN_GRID, MIN_REPS,
};
pub use rates::{
    build_solver, fit_rate_slope, run_rate_study, ErrorEvaluator, RateRow, RateTable, SlopeResult,
    MAX_FAILURE_SHARE,
};
pub use sweeps::{
    delta_threshold, heavy_tail_sweep, variance_bias_split, HeavyTailRow, HeavyTailTable,
    VarianceBiasRow, VarianceBiasTable,
};
