use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concentration::quartiles;
use crate::dgp::{NoiseSpec, NpivDgp};
use crate::error::{NpivError, Result};
use crate::estimators::FitMode;
use crate::illposedness::ProfileKind;
use crate::numerics::weighted_slope;

use super::config::{Metric, RateStudyConfig, SlopeTarget};
use super::rates::{build_solver, run_rate_study, ErrorEvaluator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceBiasRow {
    pub n: usize,
    pub j: Option<usize>,
    pub k: usize,
    /// Median of `‖ĥ − P_n h₀‖_∞`.
    pub variance_median: f64,
    /// Median of `‖P_n h₀ − h₀‖_∞`.
    pub bias_median: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceBiasTable {
    pub rows: Vec<VarianceBiasRow>,
    /// Slope of `log variance_median` on `log n` (equal weights).
    pub variance_slope: Option<f64>,
}

/// Splits the sup-norm error into the estimation term `ĥ − P_n h₀` (with `P_n h₀` the
/// estimator applied to `h₀(Y2)`) and the approximation term `P_n h₀ − h₀`.
pub fn variance_bias_split(config: &RateStudyConfig) -> Result<VarianceBiasTable> {
    config.validate()?;
    let dgp = NpivDgp::new(config.dgp.clone())?;
    let eval = ErrorEvaluator::new(&dgp)?;
    let mut rows = Vec::new();
    for &n in &config.n_grid {
        let (j, k) = config.dims(n);
        let outcomes: Vec<Result<(f64, f64)>> = (0..config.reps as u64)
            .into_par_iter()
            .map(|r| {
                let sample = dgp.sample(n, config.base_seed.wrapping_add(r))?;
                let solver = build_solver(config, &sample)?;
                let fit = solver.fit(sample.y1())?;
                let proj = solver.fit(&dgp.oracle_h(sample.y2())?)?;
                Ok((eval.sup_between(&fit, &proj)?, eval.sup_to_truth(&proj)?))
            })
            .collect();
        let ok: Vec<(f64, f64)> = outcomes.iter().filter_map(|o| o.as_ref().ok().copied()).collect();
        if ok.is_empty() {
            return Err(outcomes.into_iter().find_map(|o| o.err()).unwrap_or_else(|| {
                NpivError::Numeric("no successful replication".into())
            }));
        }
        let var: Vec<f64> = ok.iter().map(|v| v.0).collect();
        let bias: Vec<f64> = ok.iter().map(|v| v.1).collect();
        rows.push(VarianceBiasRow {
            n,
            j,
            k,
            variance_median: quartiles(&var).1,
            bias_median: quartiles(&bias).1,
            failures: config.reps - ok.len(),
        });
    }
    let positive = rows.iter().all(|r| r.variance_median > 0.0);
    let variance_slope = if positive {
        let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.variance_median.ln()).collect();
        weighted_slope(&x, &y, &vec![1.0; x.len()]).ok().map(|s| s.0)
    } else {
        None
    };
    Ok(VarianceBiasTable { rows, variance_slope })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeavyTailRow {
    /// `None` for the Gaussian baseline.
    pub delta: Option<f64>,
    pub dof: Option<f64>,
    /// Whether `δ` meets the mode's moment threshold.
    pub admissible: bool,
    pub slope: Option<f64>,
    pub target: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeavyTailTable {
    /// `d/p` for least squares, `d/(ς+p)` for mildly ill-posed NPIV.
    pub delta_threshold: f64,
    pub rows: Vec<HeavyTailRow>,
}

/// Moment threshold on `δ` for the configured mode.
pub fn delta_threshold(config: &RateStudyConfig) -> f64 {
    let d = config.dgp.d as f64;
    let p = config.dgp.p;
    match (config.mode, config.dgp.profile.as_ref().map(|pr| pr.kind)) {
        (FitMode::Npiv, Some(ProfileKind::Mild { varsigma })) => d / (varsigma + p),
        _ => d / p,
    }
}

/// Gaussian baseline plus one Student-t rate study per `δ` (degrees of freedom `2 + δ + 0.5`,
/// same noise standard deviation). Sub-threshold `δ` are reported without a target.
pub fn heavy_tail_sweep(config: &RateStudyConfig, delta_grid: &[f64]) -> Result<HeavyTailTable> {
    config.validate()?;
    let threshold = delta_threshold(config);
    let sd = config.dgp.noise.sd();
    let sup_target = |cfg: &RateStudyConfig| -> Option<SlopeTarget> {
        cfg.effective_targets().into_iter().find(|t| t.metric == Metric::Sup)
    };
    let study = |noise: NoiseSpec, tolerance: Option<f64>| -> Result<(Option<f64>, Option<SlopeTarget>)> {
        let mut cfg = config.clone();
        cfg.dgp.noise = noise;
        cfg.metrics = vec![Metric::Sup];
        cfg.targets = Vec::new();
        let mut target = sup_target(&cfg);
        if let Some(t) = target.as_mut() {
            t.tolerance = tolerance;
        }
        cfg.targets = target.into_iter().collect();
        let table = run_rate_study(&cfg)?;
        Ok((table.slope(Metric::Sup).and_then(|s| s.slope), target))
    };
    let mut rows = Vec::new();
    let (slope, target) = study(NoiseSpec::gaussian(sd), sup_target(config).and_then(|t| t.tolerance))?;
    rows.push(make_row(None, None, true, slope, target));
    for &delta in delta_grid {
        let noise = NoiseSpec::student_t_for_delta(delta, sd)?;
        let dof = match noise.family {
            crate::dgp::NoiseFamily::StudentT { dof, .. } => Some(dof),
            _ => None,
        };
        let admissible = delta >= threshold - 1e-12;
        let (slope, target) = study(noise, admissible.then_some(0.12))?;
        rows.push(make_row(Some(delta), dof, admissible, slope, target.filter(|_| admissible)));
    }
    Ok(HeavyTailTable {
        delta_threshold: threshold,
        rows,
    })
}

fn make_row(
    delta: Option<f64>,
    dof: Option<f64>,
    admissible: bool,
    slope: Option<f64>,
    target: Option<SlopeTarget>,
) -> HeavyTailRow {
    let tolerance = target.and_then(|t| t.tolerance);
    HeavyTailRow {
        delta,
        dof,
        admissible,
        slope,
        target: target.map(|t| t.slope),
        tolerance,
        pass: target
            .zip(tolerance)
            .map(|(t, tol)| slope.is_some_and(|s| (s - t.slope).abs() <= tol)),
    }
}
