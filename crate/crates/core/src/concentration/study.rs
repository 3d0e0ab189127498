use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics};

use crate::dgp::Dependence;
use crate::error::{NpivError, Result};
use crate::numerics::{weighted_least_squares, Mat};
use crate::sieve::SieveSpec;

use super::ensemble::{EnsembleKind, EnsembleSpec, GramEnsemble, TailCheck};

/// Sorted-sample quantiles `(q25, median, q75)`.
pub fn quartiles(values: &[f64]) -> (f64, f64, f64) {
    let mut data = Data::new(values.to_vec());
    (data.lower_quartile(), data.median(), data.upper_quartile())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCell {
    pub n: usize,
    pub k: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    /// `√(K log K / n)`.
    pub envelope: f64,
    pub envelope_ratio: f64,
}

/// Log-log regression of the cell medians on `n` and (when several `K` are present) on `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub n_exponent: f64,
    pub n_exponent_se: Option<f64>,
    pub k_exponent: Option<f64>,
    pub k_exponent_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub basis: SieveSpec,
    pub dependence: Dependence,
    pub reps: usize,
    pub base_seed: u64,
    pub cells: Vec<ScalingCell>,
    pub fit: ExponentFit,
    #[serde(default)]
    pub tail_checks: Vec<TailCheck>,
}

impl ConcentrationReport {
    pub fn cell(&self, n: usize, k: usize) -> Option<&ScalingCell> {
        self.cells.iter().find(|c| c.n == n && c.k == k)
    }

    /// `max/min` of the envelope ratios across `K` at sample size `n`.
    pub fn envelope_ratio_spread(&self, n: usize) -> Option<f64> {
        let r: Vec<f64> = self.cells.iter().filter(|c| c.n == n).map(|c| c.envelope_ratio).collect();
        if r.is_empty() {
            return None;
        }
        let hi = r.iter().cloned().fold(f64::MIN, f64::max);
        let lo = r.iter().cloned().fold(f64::MAX, f64::min);
        Some(hi / lo)
    }

    /// Whether every matched cell median of `self` exceeds that of `other`.
    pub fn dominates(&self, other: &ConcentrationReport) -> bool {
        let mut matched = 0;
        for c in &self.cells {
            if let Some(o) = other.cell(c.n, c.k) {
                matched += 1;
                if c.median <= o.median {
                    return false;
                }
            }
        }
        matched > 0
    }

    pub fn total_violations(&self) -> usize {
        self.tail_checks.iter().map(|t| t.violations).sum()
    }

    /// Long-format CSV of the grid cells.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["n", "k", "median", "q25", "q75", "envelope", "envelope_ratio"])?;
        for c in &self.cells {
            wr.write_record([
                c.n.to_string(),
                c.k.to_string(),
                c.median.to_string(),
                c.q25.to_string(),
                c.q75.to_string(),
                c.envelope.to_string(),
                c.envelope_ratio.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Median identifiability statistic over `reps` replications in each `(n, K)` cell,
/// with fitted exponents. Replication `r` uses seed `seed + r` in every cell.
pub fn scaling_study(
    spec: &EnsembleSpec,
    n_grid: &[usize],
    k_grid: &[usize],
    reps: usize,
    seed: u64,
) -> Result<ConcentrationReport> {
    if n_grid.is_empty() || k_grid.is_empty() || reps == 0 {
        return Err(NpivError::Config("scaling study needs non-empty grids and reps ≥ 1".into()));
    }
    let EnsembleKind::GramDeviation { basis } = &spec.kind else {
        return Err(NpivError::Config("scaling studies need a Gram-deviation ensemble".into()));
    };
    let mut cells = Vec::with_capacity(n_grid.len() * k_grid.len());
    for &k in k_grid {
        let b = basis.with_dim(k)?;
        for &n in n_grid {
            let ens = GramEnsemble::new(EnsembleSpec::gram_deviation(b.clone(), n, spec.dependence)?)?;
            let norms = ens.simulate(reps, seed)?;
            let (q25, median, q75) = quartiles(&norms);
            let kf = k as f64;
            let envelope = (kf * kf.ln().max(f64::MIN_POSITIVE) / n as f64).sqrt();
            cells.push(ScalingCell {
                n,
                k,
                median,
                q25,
                q75,
                envelope,
                envelope_ratio: median / envelope,
            });
        }
    }
    let fit = fit_exponents(&cells, n_grid.len() > 1, k_grid.len() > 1)?;
    Ok(ConcentrationReport {
        basis: basis.clone(),
        dependence: spec.dependence,
        reps,
        base_seed: seed,
        cells,
        fit,
        tail_checks: Vec::new(),
    })
}

fn fit_exponents(cells: &[ScalingCell], vary_n: bool, vary_k: bool) -> Result<ExponentFit> {
    if !vary_n {
        return Err(NpivError::Config("exponent fit needs at least two sample sizes".into()));
    }
    let cols = if vary_k { 3 } else { 2 };
    let x = Mat::from_fn(cells.len(), cols, |i, j| match j {
        0 => 1.0,
        1 => (cells[i].n as f64).ln(),
        _ => (cells[i].k as f64).ln(),
    });
    let y: Vec<f64> = cells.iter().map(|c| c.median.ln()).collect();
    let fit = weighted_least_squares(&x, &y, &vec![1.0; cells.len()])?;
    Ok(ExponentFit {
        n_exponent: fit.coef[1],
        n_exponent_se: fit.se[1],
        k_exponent: vary_k.then(|| fit.coef[2]),
        k_exponent_se: if vary_k { fit.se[2] } else { None },
    })
}
