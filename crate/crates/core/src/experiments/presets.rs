//! Shipped rate-study fixtures (d = 1, p = 2).

use serde::{Deserialize, Serialize};

use crate::dgp::{Dependence, Design, DgpConfig, NoiseSpec};
use crate::error::Result;
use crate::estimators::{FitMode, Orthonormalization};
use crate::illposedness::IllPosednessProfile;
use crate::sieve::SieveSpec;

use super::config::{Metric, RateStudyConfig, TuningRule};

pub const ACCEPTANCE_N_GRID: [usize; 5] = [1000, 2000, 4000, 8000, 16000];
pub const ACCEPTANCE_REPS: usize = 200;
pub const SMOKE_N_GRID: [usize; 4] = [250, 500, 1000, 2000];
pub const SMOKE_REPS: usize = 50;

/// Scale `c` of the mild profile `μ_k = c·k^{-1}`.
pub const MILD_SCALE: f64 = 0.6;
/// Scale `c` of the severe profile `μ_k = c·exp(−k/2)`.
pub const SEVERE_SCALE: f64 = 1.0;
/// Truth scale for NPIV fixtures; noise standard deviation is `0.3·c_a`.
pub const NPIV_C_A: f64 = 0.02;
/// Constant in the NPIV dimension rule `J = K = ⌈c·(n/ln n)^{1/7}⌉`.
pub const TUNING_CONSTANT: f64 = 2.0;
/// Constant in the least-squares rule `K = ⌈c·(n/ln n)^{1/5}⌉`; gives K = 6, 7, 8, 9, 10 on
/// the acceptance grid, one step per doubling of n.
pub const LS_TUNING_CONSTANT: f64 = 2.2;
/// Constant `c₀'` in the severe rule `J = c₀' log n`.
pub const SEVERE_CONSTANT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    LsGaussian,
    /// Student-t errors with `δ = d/p`.
    LsStudentT,
    /// Gaussian-copula AR(1) regressors with `ρ = 0.5`.
    LsMixing,
    NpivMild,
    NpivSevere,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::LsGaussian,
        Scenario::LsStudentT,
        Scenario::LsMixing,
        Scenario::NpivMild,
        Scenario::NpivSevere,
    ];
}

fn ls_config(noise: NoiseSpec, dependence: Dependence, n_grid: &[usize], reps: usize, seed: u64) -> RateStudyConfig {
    RateStudyConfig {
        dgp: DgpConfig {
            design: Design::Regression,
            profile: None,
            p: 2.0,
            c_a: 1.0,
            d: 1,
            k_trunc: 200,
            noise,
            dependence,
        },
        mode: FitMode::Ls,
        b_basis: SieveSpec::bspline(4, 0).expect("valid cubic template"),
        psi_basis: None,
        k_rule: TuningRule::PowerOfNOverLogN {
            constant: LS_TUNING_CONSTANT,
            exponent: 0.2,
            min_dim: 4,
        },
        j_rule: None,
        n_grid: n_grid.to_vec(),
        reps,
        metrics: vec![Metric::Sup, Metric::L2],
        base_seed: seed,
        targets: Vec::new(),
        orthonormalization: Orthonormalization::Empirical,
    }
}

fn npiv_config(profile: IllPosednessProfile, rule: TuningRule, n_grid: &[usize], reps: usize, seed: u64) -> RateStudyConfig {
    let cosine = SieveSpec::cosine(2).expect("valid cosine template");
    RateStudyConfig {
        dgp: DgpConfig {
            design: Design::Npiv,
            profile: Some(profile),
            p: 2.0,
            c_a: NPIV_C_A,
            d: 1,
            k_trunc: 200,
            noise: NoiseSpec::gaussian(0.3 * NPIV_C_A),
            dependence: Dependence::Iid,
        },
        mode: FitMode::Npiv,
        b_basis: cosine.clone(),
        psi_basis: Some(cosine),
        k_rule: rule,
        j_rule: Some(rule),
        n_grid: n_grid.to_vec(),
        reps,
        metrics: vec![Metric::Sup, Metric::L2],
        base_seed: seed,
        targets: Vec::new(),
        orthonormalization: Orthonormalization::Empirical,
    }
}

/// Fixture for `scenario` on the given grid.
pub fn scenario_config(scenario: Scenario, n_grid: &[usize], reps: usize, seed: u64) -> Result<RateStudyConfig> {
    let cfg = match scenario {
        Scenario::LsGaussian => ls_config(NoiseSpec::gaussian(1.0), Dependence::Iid, n_grid, reps, seed),
        Scenario::LsStudentT => ls_config(NoiseSpec::student_t_for_delta(0.5, 1.0)?, Dependence::Iid, n_grid, reps, seed),
        Scenario::LsMixing => ls_config(
            NoiseSpec::gaussian(1.0),
            Dependence::GaussianCopulaAr { rho: 0.5 },
            n_grid,
            reps,
            seed,
        ),
        Scenario::NpivMild => npiv_config(
            IllPosednessProfile::mild(1.0, MILD_SCALE)?,
            TuningRule::PowerOfNOverLogN {
                constant: TUNING_CONSTANT,
                exponent: 1.0 / 7.0,
                min_dim: 2,
            },
            n_grid,
            reps,
            seed,
        ),
        Scenario::NpivSevere => npiv_config(
            IllPosednessProfile::severe(1.0, SEVERE_SCALE)?,
            TuningRule::PowerOfLogN {
                constant: SEVERE_CONSTANT,
                exponent: 1.0,
                min_dim: 2,
            },
            n_grid,
            reps,
            seed,
        ),
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn acceptance_config(scenario: Scenario, seed: u64) -> Result<RateStudyConfig> {
    scenario_config(scenario, &ACCEPTANCE_N_GRID, ACCEPTANCE_REPS, seed)
}

pub fn smoke_config(scenario: Scenario, seed: u64) -> Result<RateStudyConfig> {
    scenario_config(scenario, &SMOKE_N_GRID, SMOKE_REPS, seed)
}
