use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concentration::quartiles;
use crate::dgp::NpivDgp;
use crate::error::{NpivError, Result};
use crate::estimators::{default_grid_per_dim, unit_grid, FitMode, FitOptions, NpivFit, NpivSolver, Sample};
use crate::numerics::{gauss_legendre, weighted_slope, Mat};
use crate::sieve::SieveSpec;

use super::config::{resize_basis, Metric, RateStudyConfig, SlopeAxis, SlopeTarget};

/// Largest tolerated failure share before a cell is dropped.
pub const MAX_FAILURE_SHARE: f64 = 0.10;

/// Oracle values on the sup-norm grid and the `L²` quadrature nodes.
#[derive(Debug, Clone)]
pub struct ErrorEvaluator {
    grid: Mat,
    h_grid: Vec<f64>,
    nodes: Mat,
    weights: Vec<f64>,
    h_nodes: Vec<f64>,
}

impl ErrorEvaluator {
    pub fn new(dgp: &NpivDgp) -> Result<Self> {
        let d = dgp.d();
        let grid = unit_grid(d, default_grid_per_dim(d));
        let rule = if d == 1 {
            gauss_legendre(8, 128)?
        } else {
            gauss_legendre(4, 16)?
        };
        let m = rule.len();
        let total = m.pow(d as u32);
        let mut nodes = Mat::zeros(total, d);
        let mut weights = vec![1.0; total];
        for p in 0..total {
            let mut rem = p;
            for a in (0..d).rev() {
                nodes[(p, a)] = rule.nodes[rem % m];
                weights[p] *= rule.weights[rem % m];
                rem /= m;
            }
        }
        Ok(Self {
            h_grid: dgp.oracle_h(&grid)?,
            h_nodes: dgp.oracle_h(&nodes)?,
            grid,
            nodes,
            weights,
        })
    }

    /// `(sup, L²)` distance between the fit and the structural function.
    pub fn errors(&self, fit: &NpivFit) -> Result<(f64, f64)> {
        let sup = fit
            .predict(&self.grid)?
            .iter()
            .zip(&self.h_grid)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let l2 = fit
            .predict(&self.nodes)?
            .iter()
            .zip(&self.h_nodes)
            .zip(&self.weights)
            .map(|((a, b), w)| w * (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        Ok((sup, l2))
    }

    /// Largest absolute difference between two fits on the sup-norm grid.
    pub fn sup_between(&self, a: &NpivFit, b: &NpivFit) -> Result<f64> {
        Ok(a.predict(&self.grid)?
            .iter()
            .zip(b.predict(&self.grid)?)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max))
    }

    pub fn sup_to_truth(&self, fit: &NpivFit) -> Result<f64> {
        Ok(self.errors(fit)?.0)
    }
}

/// Solver for the configured mode at sample size `n`.
pub fn build_solver(config: &RateStudyConfig, sample: &Sample) -> Result<NpivSolver> {
    let n = sample.n();
    let (j, k) = config.dims(n);
    let b = resize_basis(&config.b_basis, k)?;
    let opts = FitOptions {
        orthonormalization: config.orthonormalization,
        ..FitOptions::default()
    };
    let solver = match config.mode {
        FitMode::Ls => NpivSolver::least_squares(sample, &b, &opts)?,
        FitMode::Npiv => {
            let template = config
                .psi_basis
                .as_ref()
                .ok_or_else(|| NpivError::Config("NPIV study without psi_basis".into()))?;
            let j = j.ok_or_else(|| NpivError::Config("NPIV study without j_rule".into()))?;
            let psi: SieveSpec = resize_basis(template, j)?;
            NpivSolver::npiv(sample, &psi, &b, &opts)?
        }
    };
    Ok(solver.with_smoothness(config.dgp.p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    pub j: Option<usize>,
    pub k: usize,
    pub metric: Metric,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub failures: usize,
    pub dropped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeResult {
    pub metric: Metric,
    pub axis: SlopeAxis,
    pub slope: Option<f64>,
    pub se: Option<f64>,
    pub target: f64,
    pub tolerance: Option<f64>,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub mode: FitMode,
    pub reps: usize,
    pub base_seed: u64,
    pub rows: Vec<RateRow>,
    pub slopes: Vec<SlopeResult>,
    /// First failure message per cell, for diagnosis.
    #[serde(default)]
    pub failure_messages: Vec<String>,
}

impl RateTable {
    pub fn row(&self, n: usize, metric: Metric) -> Option<&RateRow> {
        self.rows.iter().find(|r| r.n == n && r.metric == metric)
    }

    pub fn slope(&self, metric: Metric) -> Option<&SlopeResult> {
        self.slopes.iter().find(|s| s.metric == metric)
    }

    /// Number of increases of the median along `n` for `metric`.
    pub fn monotone_inversions(&self, metric: Metric) -> usize {
        let m: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.metric == metric && !r.dropped)
            .map(|r| r.median)
            .collect();
        m.windows(2).filter(|w| w[1] > w[0]).count()
    }

    pub fn all_pass(&self) -> bool {
        self.slopes.iter().all(|s| s.pass != Some(false))
    }

    /// Long-format CSV: `n, metric, median, q25, q75`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["n", "metric", "median", "q25", "q75"])?;
        for r in self.rows.iter().filter(|r| !r.dropped) {
            wr.write_record([
                r.n.to_string(),
                r.metric.name().to_string(),
                r.median.to_string(),
                r.q25.to_string(),
                r.q75.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Weighted least-squares slope of `log median` on `axis(n)` with weights equal to the
/// inverse squared interquartile range on the log scale (equal weights if any range is zero).
pub fn fit_rate_slope(
    ns: &[usize],
    medians: &[f64],
    iqr: &[(f64, f64)],
    axis: SlopeAxis,
) -> Result<(f64, Option<f64>)> {
    if ns.len() != medians.len() || ns.len() != iqr.len() {
        return Err(NpivError::Domain("slope inputs differ in length".into()));
    }
    if medians.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
        return Err(NpivError::Numeric("medians must be positive to fit a log-log slope".into()));
    }
    let x: Vec<f64> = ns.iter().map(|&n| axis.transform(n as f64)).collect();
    let y: Vec<f64> = medians.iter().map(|m| m.ln()).collect();
    let spread: Vec<f64> = iqr
        .iter()
        .map(|(lo, hi)| if *lo > 0.0 { hi.ln() - lo.ln() } else { 0.0 })
        .collect();
    let w = if spread.iter().all(|s| *s > 0.0 && s.is_finite()) {
        spread.iter().map(|s| 1.0 / (s * s)).collect()
    } else {
        vec![1.0; ns.len()]
    };
    weighted_slope(&x, &y, &w)
}

type RepOutcome = std::result::Result<(f64, f64), String>;

fn run_replications(config: &RateStudyConfig, dgp: &NpivDgp, eval: &ErrorEvaluator, n: usize) -> Vec<RepOutcome> {
    (0..config.reps as u64)
        .into_par_iter()
        .map(|r| {
            let seed = config.base_seed.wrapping_add(r);
            let run = || -> Result<(f64, f64)> {
                let sample = dgp.sample(n, seed)?;
                let fit = build_solver(config, &sample)?.fit(sample.y1())?;
                eval.errors(&fit)
            };
            run().map_err(|e| e.to_string())
        })
        .collect()
}

/// Monte Carlo rate study: replication `r` at every `n` uses seed `base_seed + r`.
pub fn run_rate_study(config: &RateStudyConfig) -> Result<RateTable> {
    config.validate()?;
    let dgp = NpivDgp::new(config.dgp.clone())?;
    let eval = ErrorEvaluator::new(&dgp)?;
    let mut rows = Vec::new();
    let mut failure_messages = Vec::new();
    for &n in &config.n_grid {
        let (j, k) = config.dims(n);
        let outcomes = run_replications(config, &dgp, &eval, n);
        let ok: Vec<(f64, f64)> = outcomes.iter().filter_map(|o| o.as_ref().ok().copied()).collect();
        let failures = outcomes.len() - ok.len();
        if let Some(Err(msg)) = outcomes.iter().find(|o| o.is_err()) {
            failure_messages.push(format!("n = {n}: {msg}"));
        }
        let dropped = failures as f64 > MAX_FAILURE_SHARE * config.reps as f64 || ok.is_empty();
        for &metric in &config.metrics {
            let vals: Vec<f64> = ok
                .iter()
                .map(|&(s, l)| if metric == Metric::Sup { s } else { l })
                .collect();
            let (q25, median, q75) = if vals.is_empty() {
                (f64::NAN, f64::NAN, f64::NAN)
            } else {
                quartiles(&vals)
            };
            rows.push(RateRow {
                n,
                j,
                k,
                metric,
                median,
                q25,
                q75,
                failures,
                dropped,
            });
        }
    }
    let slopes = config
        .effective_targets()
        .iter()
        .map(|t| slope_for_target(&rows, t))
        .collect();
    Ok(RateTable {
        mode: config.mode,
        reps: config.reps,
        base_seed: config.base_seed,
        rows,
        slopes,
        failure_messages,
    })
}

fn slope_for_target(rows: &[RateRow], target: &SlopeTarget) -> SlopeResult {
    let kept: Vec<&RateRow> = rows.iter().filter(|r| r.metric == target.metric && !r.dropped).collect();
    let fitted = if kept.len() >= 2 {
        let ns: Vec<usize> = kept.iter().map(|r| r.n).collect();
        let med: Vec<f64> = kept.iter().map(|r| r.median).collect();
        let iqr: Vec<(f64, f64)> = kept.iter().map(|r| (r.q25, r.q75)).collect();
        fit_rate_slope(&ns, &med, &iqr, target.axis).ok()
    } else {
        None
    };
    let slope = fitted.map(|f| f.0).filter(|s| s.is_finite());
    SlopeResult {
        metric: target.metric,
        axis: target.axis,
        slope,
        se: fitted.and_then(|f| f.1),
        target: target.slope,
        tolerance: target.tolerance,
        pass: target
            .tolerance
            .map(|tol| slope.is_some_and(|s| (s - target.slope).abs() <= tol)),
    }
}
