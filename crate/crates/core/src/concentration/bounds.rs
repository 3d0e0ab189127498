use serde::{Deserialize, Serialize};

use crate::error::{NpivError, Result};

/// Parameters of the matrix Bernstein bounds for `Σ_i Ξ_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// Almost-sure bound on `‖Ξ_i‖`.
    pub r_n: f64,
    /// Variance proxy `max(‖Σ E Ξ_i Ξ_i'‖, ‖Σ E Ξ_i' Ξ_i‖)` for independent summands.
    pub sigma2_n: f64,
    /// Pairwise proxy `max_{i,j} max(‖E Ξ_i Ξ_j'‖, ‖E Ξ_i' Ξ_j‖)` for dependent summands.
    pub s2_n: f64,
    /// Block length.
    pub q: usize,
    /// Bound on the β-mixing coefficient at lag `q`.
    pub beta_q: f64,
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        let vals = [self.r_n, self.sigma2_n, self.s2_n, self.beta_q];
        if vals.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(NpivError::Domain(format!("bound parameters must be non-negative: {self:?}")));
        }
        if self.q == 0 {
            return Err(NpivError::Domain("block length q must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(NpivError::Domain(format!("threshold t = {t} must be finite and non-negative")));
    }
    Ok(())
}

fn bernstein_exp(t: f64, variance: f64, range: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    let denom = variance + range * t / 3.0;
    if denom == 0.0 {
        return 0.0;
    }
    (-(t * t / 2.0) / denom).exp()
}

/// `(d₁+d₂)·exp(−(t²/2)/(σ_n² + R_n t/3))`, a bound on `P(‖Σ Ξ_i‖ ≥ t)` for independent
/// mean-zero summands.
pub fn tropp_tail(t: f64, params: &BoundParams, dims: (usize, usize)) -> Result<f64> {
    check_t(t)?;
    params.validate()?;
    Ok((dims.0 + dims.1) as f64 * bernstein_exp(t, params.sigma2_n, params.r_n))
}

/// Bound on `P(‖Σ Ξ_i‖ ≥ 6t)` for a stationary β-mixing sequence:
/// `(n/q)β(q) + min(1, qR_n/t) + 2(d₁+d₂)exp(−(t²/2)/(nq s_n² + qR_n t/3))`.
///
/// The remainder-block probability is replaced by the almost-sure bound `min(1, qR_n/t)`.
pub fn beta_tropp_tail(t: f64, params: &BoundParams, dims: (usize, usize), n: usize) -> Result<f64> {
    check_t(t)?;
    params.validate()?;
    let q = params.q;
    if 2 * q > n {
        return Err(NpivError::Domain(format!("block length q = {q} must lie in [1, n/2] for n = {n}")));
    }
    let coupling = n as f64 / q as f64 * params.beta_q;
    let remainder = if t == 0.0 {
        1.0
    } else {
        (q as f64 * params.r_n / t).min(1.0)
    };
    let exp_term = 2.0
        * (dims.0 + dims.1) as f64
        * bernstein_exp(t, n as f64 * q as f64 * params.s2_n, q as f64 * params.r_n);
    Ok(coupling + remainder + exp_term)
}

/// Default block length `⌈n^{1/3}⌉`.
pub fn default_block_length(n: usize) -> usize {
    ((n as f64).cbrt().ceil() as usize).max(1)
}

/// Upper bound on the β-mixing coefficient at lag `q` of `d` independent stationary Gaussian
/// AR(1) coordinates with coefficient `rho` (and of any coordinatewise transform of them):
/// Pinsker's inequality applied to the Kullback–Leibler divergence `−(d/2)·ln(1−ρ^{2q})`
/// between the joint law of `(Z_0, Z_q)` and the product of its marginals.
pub fn gaussian_ar_beta(rho: f64, q: usize, d: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&rho) {
        return Err(NpivError::Domain(format!("rho = {rho} outside [0, 1)")));
    }
    let r2 = rho.powi(2 * q as i32);
    let kl = -0.5 * d as f64 * (-r2).ln_1p();
    Ok((kl / 2.0).sqrt().min(1.0))
}

/// Wilson score interval for `successes` out of `trials` at normal quantile `z`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Two-sided 99% normal quantile.
pub const Z_99: f64 = 2.5758293035489004;

/// Normal quantile used to flag bound violations ("3 standard errors").
pub const Z_VIOLATION: f64 = 3.0;

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> BoundParams {
        BoundParams {
            r_n: 0.1,
            sigma2_n: 0.05,
            s2_n: 1e-4,
            q: 5,
            beta_q: 0.0,
        }
    }

    #[test]
    fn tropp_at_zero_and_scalar_case() {
        let p = params();
        assert_eq!(tropp_tail(0.0, &p, (3, 4)).unwrap(), 7.0);
        let t: f64 = 0.4;
        let scalar = 2.0 * (-(t * t / 2.0) / (0.05 + 0.1 * t / 3.0)).exp();
        assert!((tropp_tail(t, &p, (1, 1)).unwrap() - scalar).abs() < 1e-15);
        assert!(tropp_tail(-1.0, &p, (1, 1)).is_err());
    }

    #[test]
    fn beta_bound_degenerate_mixing_is_vacuous() {
        let mut p = params();
        p.beta_q = 1.0;
        assert!(beta_tropp_tail(0.3, &p, (2, 2), 100).unwrap() >= 100.0 / 5.0);
        p.q = 60;
        assert!(beta_tropp_tail(0.3, &p, (2, 2), 100).is_err());
        p.q = 0;
        assert!(beta_tropp_tail(0.3, &p, (2, 2), 100).is_err());
    }

    #[test]
    fn ar_beta_limits() {
        assert_eq!(gaussian_ar_beta(0.0, 3, 1).unwrap(), 0.0);
        assert!(gaussian_ar_beta(0.5, 25, 1).unwrap() < 1e-7);
        assert!(gaussian_ar_beta(0.99, 1, 1).unwrap() > 0.5);
        assert!(gaussian_ar_beta(1.0, 1, 1).is_err());
    }

    #[test]
    fn wilson_brackets_the_proportion() {
        let (lo, hi) = wilson_interval(30, 100, Z_99);
        assert!(lo < 0.3 && 0.3 < hi);
        assert_eq!(wilson_interval(0, 100, Z_99).0, 0.0);
        let (lo, hi) = wilson_interval(0, 0, Z_99);
        assert_eq!((lo, hi), (0.0, 1.0));
    }

    #[test]
    fn default_block() {
        assert_eq!(default_block_length(1000), 10);
        assert_eq!(default_block_length(1001), 11);
        assert_eq!(default_block_length(1), 1);
    }
}
