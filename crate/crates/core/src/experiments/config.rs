use serde::{Deserialize, Serialize};

use crate::dgp::{Design, DgpConfig};
use crate::error::{NpivError, Result};
use crate::estimators::{FitMode, Orthonormalization};
use crate::illposedness::ProfileKind;
use crate::sieve::SieveSpec;

/// Sieve dimension as a function of the sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TuningRule {
    Fixed { dim: usize },
    /// `max(min_dim, ⌈c·(n/ln n)^exponent⌉)`.
    PowerOfNOverLogN { constant: f64, exponent: f64, min_dim: usize },
    /// `max(min_dim, ⌈c·(ln n)^exponent⌉)`.
    PowerOfLogN { constant: f64, exponent: f64, min_dim: usize },
}

impl TuningRule {
    pub fn dim(&self, n: usize) -> usize {
        let ln = (n as f64).ln();
        match *self {
            TuningRule::Fixed { dim } => dim,
            TuningRule::PowerOfNOverLogN {
                constant,
                exponent,
                min_dim,
            } => min_dim.max((constant * (n as f64 / ln).powf(exponent)).ceil() as usize),
            TuningRule::PowerOfLogN {
                constant,
                exponent,
                min_dim,
            } => min_dim.max((constant * ln.powf(exponent)).ceil() as usize),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            TuningRule::Fixed { dim } => dim > 0,
            TuningRule::PowerOfNOverLogN {
                constant, exponent, ..
            }
            | TuningRule::PowerOfLogN {
                constant, exponent, ..
            } => constant > 0.0 && exponent > 0.0 && constant.is_finite() && exponent.is_finite(),
        };
        if !ok {
            return Err(NpivError::Config(format!("invalid tuning rule {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Sup,
    L2,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Sup => "sup",
            Metric::L2 => "l2",
        }
    }
}

/// Regressor used when fitting `log median error`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeAxis {
    LogN,
    LogNOverLogN,
    LogLogN,
}

impl SlopeAxis {
    pub fn transform(self, n: f64) -> f64 {
        match self {
            SlopeAxis::LogN => n.ln(),
            SlopeAxis::LogNOverLogN => (n / n.ln()).ln(),
            SlopeAxis::LogLogN => n.ln().ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeTarget {
    pub metric: Metric,
    pub axis: SlopeAxis,
    pub slope: f64,
    /// `None` reports the slope without a pass/fail verdict.
    #[serde(default)]
    pub tolerance: Option<f64>,
}

fn all_metrics() -> Vec<Metric> {
    vec![Metric::Sup, Metric::L2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateStudyConfig {
    pub dgp: DgpConfig,
    pub mode: FitMode,
    /// Instrument (or regressor) basis family; resized per `n` by `k_rule`.
    pub b_basis: SieveSpec,
    /// Endogenous basis family (NPIV only); resized by `j_rule`.
    #[serde(default)]
    pub psi_basis: Option<SieveSpec>,
    pub k_rule: TuningRule,
    #[serde(default)]
    pub j_rule: Option<TuningRule>,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    #[serde(default = "all_metrics")]
    pub metrics: Vec<Metric>,
    pub base_seed: u64,
    /// Defaults to [`default_targets`] when empty.
    #[serde(default)]
    pub targets: Vec<SlopeTarget>,
    #[serde(default)]
    pub orthonormalization: Orthonormalization,
}

/// Smallest admissible replication count and grid length.
pub const MIN_REPS: usize = 50;
pub const MIN_GRID: usize = 4;

impl RateStudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.len() < MIN_GRID {
            return Err(NpivError::Config(format!("n_grid needs at least {MIN_GRID} sizes")));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) || self.n_grid[0] < 16 {
            return Err(NpivError::Config("n_grid must be strictly increasing and start at 16 or more".into()));
        }
        if self.reps < MIN_REPS {
            return Err(NpivError::Config(format!("reps = {} below {MIN_REPS}", self.reps)));
        }
        if self.metrics.is_empty() {
            return Err(NpivError::Config("no error metric selected".into()));
        }
        self.k_rule.validate()?;
        let d = self.dgp.d;
        let check_basis = |b: &SieveSpec| -> Result<()> {
            if b.domain_dim() != d {
                return Err(NpivError::Config(format!(
                    "basis {b} has dimension {}, DGP has {d}",
                    b.domain_dim()
                )));
            }
            Ok(())
        };
        check_basis(&self.b_basis)?;
        match self.mode {
            FitMode::Ls => {
                if self.dgp.design != Design::Regression {
                    return Err(NpivError::Config("least-squares studies need the regression design".into()));
                }
                if self.psi_basis.is_some() || self.j_rule.is_some() {
                    return Err(NpivError::Config("least-squares studies take no psi basis or J rule".into()));
                }
                if matches!(self.k_rule, TuningRule::PowerOfLogN { .. }) {
                    return Err(NpivError::Config("least-squares K rule must be polynomial in n".into()));
                }
            }
            FitMode::Npiv => {
                if self.dgp.design != Design::Npiv {
                    return Err(NpivError::Config("NPIV studies need the NPIV design".into()));
                }
                let (Some(psi), Some(j_rule)) = (&self.psi_basis, &self.j_rule) else {
                    return Err(NpivError::Config("NPIV studies need psi_basis and j_rule".into()));
                };
                check_basis(psi)?;
                j_rule.validate()?;
                let profile = self.dgp.profile.as_ref().ok_or_else(|| {
                    NpivError::Config("NPIV studies need an ill-posedness profile".into())
                })?;
                let consistent = |r: &TuningRule| match (profile.kind, r) {
                    (_, TuningRule::Fixed { .. }) => true,
                    (ProfileKind::Mild { .. }, TuningRule::PowerOfNOverLogN { .. }) => true,
                    (ProfileKind::Severe { .. }, TuningRule::PowerOfLogN { .. }) => true,
                    _ => false,
                };
                if !consistent(j_rule) || !consistent(&self.k_rule) {
                    return Err(NpivError::Config(
                        "tuning rule does not match the profile kind (polynomial for mild, logarithmic for severe)".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// `(J, K)` at sample size `n`; `J` is `None` for least squares.
    pub fn dims(&self, n: usize) -> (Option<usize>, usize) {
        (self.j_rule.map(|r| r.dim(n)), self.k_rule.dim(n))
    }

    pub fn effective_targets(&self) -> Vec<SlopeTarget> {
        if self.targets.is_empty() {
            default_targets(self)
        } else {
            self.targets.clone()
        }
    }
}

/// Per-axis dimension `k` applied to every axis of a tensor template.
pub fn resize_basis(template: &SieveSpec, k: usize) -> Result<SieveSpec> {
    let axes = template
        .axes()
        .iter()
        .map(|a| {
            SieveSpec::univariate(a.clone())
                .and_then(|s| s.with_dim(k))
                .map(|s| s.axes()[0].clone())
        })
        .collect::<Result<Vec<_>>>()?;
    SieveSpec::new(axes)
}

/// Rate exponent `−p/(2p+d)` for least squares, `−p/(2(p+ς)+d)` for mildly and `−p/ς`
/// (against `log log n`) for severely ill-posed NPIV.
pub fn theory_slope(config: &RateStudyConfig) -> (SlopeAxis, f64) {
    let p = config.dgp.p;
    let d = config.dgp.d as f64;
    match (config.mode, config.dgp.profile.as_ref().map(|pr| pr.kind)) {
        (FitMode::Npiv, Some(ProfileKind::Mild { varsigma })) => {
            (SlopeAxis::LogNOverLogN, -p / (2.0 * (p + varsigma) + d))
        }
        (FitMode::Npiv, Some(ProfileKind::Severe { varsigma })) => (SlopeAxis::LogLogN, -p / varsigma),
        _ => (SlopeAxis::LogNOverLogN, -p / (2.0 * p + d)),
    }
}

/// Targets for the configured metrics: least squares ±0.08 in sup norm; mild NPIV ±0.10 in
/// sup norm against `log(n/log n)` and in `L²` against `log n`; severe NPIV reported only.
pub fn default_targets(config: &RateStudyConfig) -> Vec<SlopeTarget> {
    let (axis, slope) = theory_slope(config);
    let severe = axis == SlopeAxis::LogLogN;
    config
        .metrics
        .iter()
        .map(|&metric| {
            let axis = match (metric, config.mode, severe) {
                (_, _, true) => SlopeAxis::LogLogN,
                (Metric::L2, FitMode::Npiv, false) => SlopeAxis::LogN,
                _ => SlopeAxis::LogNOverLogN,
            };
            let tolerance = match (config.mode, severe, metric) {
                (_, true, _) => None,
                (FitMode::Ls, _, Metric::Sup) => Some(0.08),
                (FitMode::Ls, _, Metric::L2) => None,
                (FitMode::Npiv, _, _) => Some(0.10),
            };
            SlopeTarget {
                metric,
                axis,
                slope,
                tolerance,
            }
        })
        .collect()
}
