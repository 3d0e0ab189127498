use super::linalg::{pinv_with_rank, solve};
use super::mat::Mat;
use crate::error::{NpivError, Result};

/// Weighted least-squares coefficients with classical standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub coef: Vec<f64>,
    /// `None` when there are no residual degrees of freedom.
    pub se: Vec<Option<f64>>,
    pub residual_variance: Option<f64>,
}

/// Minimizes `Σ w_i (y_i − x_i'β)²` over `β`.
pub fn weighted_least_squares(x: &Mat, y: &[f64], w: &[f64]) -> Result<LinearFit> {
    let (n, p) = x.shape();
    if y.len() != n || w.len() != n {
        return Err(NpivError::Domain("regression: row counts differ".into()));
    }
    if n < p || p == 0 {
        return Err(NpivError::Domain(format!("regression: {n} rows for {p} coefficients")));
    }
    if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) || y.iter().any(|v| !v.is_finite()) {
        return Err(NpivError::Domain("regression: weights must be positive and data finite".into()));
    }
    let mut xtwx = Mat::zeros(p, p);
    let mut xtwy = vec![0.0; p];
    for i in 0..n {
        let r = x.row(i);
        for a in 0..p {
            xtwy[a] += w[i] * r[a] * y[i];
            for b in 0..p {
                xtwx[(a, b)] += w[i] * r[a] * r[b];
            }
        }
    }
    let (inv, dropped) = pinv_with_rank(&xtwx, 1e-12)?;
    if dropped > 0 {
        return Err(NpivError::RankDeficient { min_eig: 0.0 });
    }
    let coef = solve(&xtwx, &xtwy)?;
    let dof = n - p;
    let residual_variance = (dof > 0).then(|| {
        (0..n)
            .map(|i| {
                let fit: f64 = x.row(i).iter().zip(&coef).map(|(a, b)| a * b).sum();
                w[i] * (y[i] - fit).powi(2)
            })
            .sum::<f64>()
            / dof as f64
    });
    let se = (0..p)
        .map(|a| residual_variance.map(|s2| (s2 * inv[(a, a)]).max(0.0).sqrt()))
        .collect();
    Ok(LinearFit {
        coef,
        se,
        residual_variance,
    })
}

/// Slope and its standard error from regressing `y` on `[1, x]` with weights `w`.
pub fn weighted_slope(x: &[f64], y: &[f64], w: &[f64]) -> Result<(f64, Option<f64>)> {
    let design = Mat::from_fn(x.len(), 2, |i, j| if j == 0 { 1.0 } else { x[i] });
    let fit = weighted_least_squares(&design, y, w)?;
    Ok((fit.coef[1], fit.se[1]))
}
