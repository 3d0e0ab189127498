use crate::error::{NpivError, Result};
use crate::numerics::{Mat, QuadratureRule};

use super::npiv::NpivFit;

/// Tensor grid with `per_dim` equispaced points per axis (endpoints included), one point per row.
pub fn unit_grid(d: usize, per_dim: usize) -> Mat {
    let total = per_dim.pow(d as u32);
    let step = 1.0 / (per_dim.max(2) - 1) as f64;
    let mut out = Mat::zeros(total, d);
    for p in 0..total {
        let mut rem = p;
        for a in (0..d).rev() {
            out[(p, a)] = (rem % per_dim) as f64 * step;
            rem /= per_dim;
        }
    }
    out
}

/// Default sup-norm grid size: 1001 points for d = 1, 101 per axis otherwise.
pub fn default_grid_per_dim(d: usize) -> usize {
    if d == 1 {
        1001
    } else {
        101
    }
}

/// Max absolute difference between the fit and `oracle` over the tensor grid.
pub fn sup_norm_distance(
    fit: &NpivFit,
    oracle: impl Fn(&[f64]) -> f64,
    grid_per_dim: usize,
) -> Result<f64> {
    if grid_per_dim < 2 {
        return Err(NpivError::Domain("sup-norm grid needs at least 2 points per axis".into()));
    }
    let grid = unit_grid(fit.domain_dim(), grid_per_dim);
    let pred = fit.predict(&grid)?;
    Ok(pred
        .iter()
        .enumerate()
        .map(|(i, p)| (p - oracle(grid.row(i))).abs())
        .fold(0.0, f64::max))
}

/// `L²` distance under the tensor product of the univariate `rule`.
pub fn l2_distance(
    fit: &NpivFit,
    oracle: impl Fn(&[f64]) -> f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    let d = fit.domain_dim();
    let m = rule.len();
    let total = m.pow(d as u32);
    let mut nodes = Mat::zeros(total, d);
    let mut weights = vec![1.0; total];
    for p in 0..total {
        let mut rem = p;
        for a in (0..d).rev() {
            let i = rem % m;
            rem /= m;
            nodes[(p, a)] = rule.nodes[i];
            weights[p] *= rule.weights[i];
        }
    }
    let pred = fit.predict(&nodes)?;
    let ss: f64 = pred
        .iter()
        .enumerate()
        .map(|(i, p)| weights[i] * (p - oracle(nodes.row(i))).powi(2))
        .sum();
    Ok(ss.sqrt())
}
