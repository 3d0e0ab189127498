use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{NpivError, Result};
use crate::estimators::Sample;
use crate::illposedness::{IllPosednessProfile, ProfileKind};
use crate::numerics::Mat;

use super::noise::{draw_noise, NoiseSpec};

/// Smallest per-axis joint density accepted by the samplers.
pub const MIN_DENSITY: f64 = 0.1;

/// Largest admissible tail `Σ_{k>K_trunc} μ_k a_k`.
pub const TAIL_TOLERANCE: f64 = 1e-8;

/// Grid size used to locate the minimum of the density kernel.
const KERNEL_GRID: usize = 1 << 14;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    /// Endogenous `Y2` linked to the instrument `X` through the cosine kernel density.
    #[default]
    Npiv,
    /// Regression: `Y2 = X`, uniform marginals.
    Regression,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dependence {
    #[default]
    Iid,
    /// Regressors `Φ(z_t)` with latent Gaussian AR(1) `z_t`.
    GaussianCopulaAr { rho: f64 },
}

/// Serializable description of a data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    #[serde(default)]
    pub design: Design,
    /// Required for the NPIV design; ignored for regression.
    #[serde(default)]
    pub profile: Option<IllPosednessProfile>,
    /// Smoothness `p` of `h₀`.
    pub p: f64,
    /// Coefficient scale `c_a`.
    pub c_a: f64,
    #[serde(default = "one")]
    pub d: usize,
    #[serde(default = "default_trunc")]
    pub k_trunc: usize,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub dependence: Dependence,
}

fn one() -> usize {
    1
}

fn default_trunc() -> usize {
    200
}

/// `Σ_{k=1}^{K} c_k cos(kπt)` by Clenshaw's recurrence (`coef[0]` is `c_1`).
pub fn cosine_series(coef: &[f64], t: f64) -> f64 {
    let x = (std::f64::consts::PI * t).cos();
    let (mut b1, mut b2) = (0.0, 0.0);
    for &c in coef.iter().rev() {
        let b0 = c + 2.0 * x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    // series without constant term: x·b_1 − b_2 where b_1 includes c_1
    x * b1 - b2
}

/// Validated DGP with precomputed series coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct NpivDgp {
    config: DgpConfig,
    /// `μ_1..μ_L` per axis (empty for regression).
    mu: Vec<f64>,
    /// Per-axis truth weights `k^{-(p+1/2)}`, `k = 1..K_trunc`.
    weights: Vec<f64>,
    /// `√2 k^{-(p+1/2)}` and `√2 μ_k k^{-(p+1/2)}`.
    h_series: Vec<f64>,
    th_series: Vec<f64>,
    envelope: f64,
    min_density: f64,
}

impl NpivDgp {
    pub fn new(config: DgpConfig) -> Result<Self> {
        let c = &config;
        if !(c.p > 0.0 && c.p.is_finite()) {
            return Err(NpivError::Config(format!("smoothness p = {} must be positive", c.p)));
        }
        if !c.c_a.is_finite() {
            return Err(NpivError::Config("c_a must be finite".into()));
        }
        if !(1..=2).contains(&c.d) {
            return Err(NpivError::Config(format!("dimension d = {} not in {{1, 2}}", c.d)));
        }
        if c.k_trunc == 0 {
            return Err(NpivError::Config("k_trunc must be positive".into()));
        }
        c.noise.validate()?;
        match (c.design, c.dependence) {
            (_, Dependence::GaussianCopulaAr { rho }) if !(0.0..1.0).contains(&rho) => {
                return Err(NpivError::Domain(format!("rho = {rho} outside [0, 1)")));
            }
            (Design::Npiv, Dependence::GaussianCopulaAr { .. }) => {
                return Err(NpivError::Config(
                    "mixing dependence is only supported for the regression design".into(),
                ));
            }
            _ => {}
        }
        // d = 2 is a product of two univariate DGPs with per-axis smoothness p
        let weights: Vec<f64> = (1..=c.k_trunc)
            .map(|k| (k as f64).powf(-(c.p + 0.5)))
            .collect();
        let r2 = std::f64::consts::SQRT_2;
        let h_series = weights.iter().map(|w| r2 * w).collect();
        let (mu, th_series) = match c.design {
            Design::Regression => (Vec::new(), weights.iter().map(|w| r2 * w).collect()),
            Design::Npiv => {
                let profile = c.profile.as_ref().ok_or_else(|| {
                    NpivError::Config("the NPIV design needs an ill-posedness profile".into())
                })?;
                profile.validate()?;
                let mu = profile.mu_vec();
                let th = weights
                    .iter()
                    .enumerate()
                    .map(|(i, w)| r2 * w * mu.get(i).copied().unwrap_or(0.0))
                    .collect();
                (mu, th)
            }
        };
        let (envelope, min_density) = if mu.is_empty() {
            (1.0, 1.0)
        } else {
            let sum: f64 = mu.iter().sum();
            let min_g = (0..=KERNEL_GRID)
                .map(|i| cosine_series(&mu, 2.0 * i as f64 / KERNEL_GRID as f64))
                .fold(f64::INFINITY, f64::min);
            (1.0 + 2.0 * sum, 1.0 + 2.0 * min_g)
        };
        if min_density < 0.0 {
            return Err(NpivError::Config(format!(
                "joint density is negative (reaches {min_density:.4}); reduce the profile scale"
            )));
        }
        let dgp = Self {
            mu,
            weights,
            h_series,
            th_series,
            envelope,
            min_density,
            config,
        };
        if dgp.config.design == Design::Npiv {
            let tail = dgp.truth_tail();
            if tail >= TAIL_TOLERANCE {
                return Err(NpivError::Config(format!(
                    "series tail Σ_{{k>{}}} μ_k a_k = {tail:e} exceeds {TAIL_TOLERANCE:e}",
                    dgp.config.k_trunc
                )));
            }
        }
        Ok(dgp)
    }

    pub fn config(&self) -> &DgpConfig {
        &self.config
    }

    pub fn d(&self) -> usize {
        self.config.d
    }

    /// Per-axis `μ_1, μ_2, …` (empty for the regression design).
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Coefficients `a_k` of `h₀ = Σ a_k φ_k` for d = 1 (per-axis weights times `c_a` otherwise).
    pub fn truth_coef(&self) -> Vec<f64> {
        self.weights.iter().map(|w| self.config.c_a * w).collect()
    }

    /// Rejection envelope `1 + 2Σμ_k` of the per-axis density.
    pub fn envelope(&self) -> f64 {
        self.envelope
    }

    /// Lower bound `1 + 2 min_θ Σ μ_k cos(kπθ)` of the per-axis density.
    pub fn min_density(&self) -> f64 {
        self.min_density
    }

    /// `Σ_{k>K_trunc} μ_k a_k` under the profile's decay law, bounded by the integral of the
    /// decreasing summand. Zero when the profile is deliberately shorter than `K_trunc`
    /// (finite-rank operator).
    pub fn truth_tail(&self) -> f64 {
        let Some(profile) = &self.config.profile else {
            return 0.0;
        };
        let k0 = self.config.k_trunc;
        if profile.len < k0 {
            return 0.0;
        }
        let c_a = self.config.c_a.abs();
        let s = self.config.p + 0.5;
        let e = profile.exponent();
        let mu_raw = |k: f64| match profile.kind {
            ProfileKind::Mild { .. } => profile.scale * k.powf(-e),
            ProfileKind::Severe { .. } => {
                profile.scale * (-k.powf(e) / 2.0).exp()
            }
        };
        let term = |k: f64| c_a * mu_raw(k) * k.powf(-s);
        // explicit sum over a long stretch, then an integral bound for the remainder
        let stop = 100 * k0;
        let head: f64 = (k0 + 1..=stop).map(|k| term(k as f64)).sum();
        let rest = match profile.kind {
            ProfileKind::Mild { .. } => {
                c_a * profile.scale * (stop as f64).powf(1.0 - e - s) / (e + s - 1.0)
            }
            ProfileKind::Severe { .. } => 0.0,
        };
        head + rest
    }

    /// Per-axis joint density `f(x, y) = 1 + Σ μ_k φ_k(x) φ_k(y) = 1 + g(x−y) + g(x+y)`.
    pub fn axis_density(&self, x: f64, y: f64) -> f64 {
        if self.mu.is_empty() {
            return 1.0;
        }
        1.0 + cosine_series(&self.mu, x - y) + cosine_series(&self.mu, x + y)
    }

    /// Joint density of `(X, Y2)` on `[0,1]^d × [0,1]^d`.
    pub fn density(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).map(|(&a, &b)| self.axis_density(a, b)).product()
    }

    fn check_points(&self, points: &Mat) -> Result<()> {
        if points.cols() != self.d() {
            return Err(NpivError::Domain(format!(
                "points have dimension {}, DGP has {}",
                points.cols(),
                self.d()
            )));
        }
        if points.as_slice().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(NpivError::Domain("points outside [0, 1]^d".into()));
        }
        Ok(())
    }

    pub fn h0_point(&self, y: &[f64]) -> f64 {
        self.config.c_a * y.iter().map(|&t| cosine_series(&self.h_series, t)).product::<f64>()
    }

    pub fn th0_point(&self, x: &[f64]) -> f64 {
        self.config.c_a * x.iter().map(|&t| cosine_series(&self.th_series, t)).product::<f64>()
    }

    /// `h₀` at each row of `points`.
    pub fn oracle_h(&self, points: &Mat) -> Result<Vec<f64>> {
        self.check_points(points)?;
        Ok((0..points.rows()).map(|i| self.h0_point(points.row(i))).collect())
    }

    /// `Th₀ = E[h₀(Y2) | X = x]` at each row of `points`.
    pub fn oracle_th(&self, points: &Mat) -> Result<Vec<f64>> {
        self.check_points(points)?;
        Ok((0..points.rows()).map(|i| self.th0_point(points.row(i))).collect())
    }

    /// Draws a sample according to the configured dependence.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Sample> {
        match self.config.dependence {
            Dependence::Iid => sample_iid(self, n, seed),
            Dependence::GaussianCopulaAr { rho } => sample_mixing(self, n, rho, seed),
        }
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `n × d` regressors `Φ(z_t)` with independent latent AR(1) coordinates
/// `z_t = ρ z_{t-1} + √(1−ρ²) e_t`, `z_1 = e_1`.
pub fn ar_copula_regressors(n: usize, d: usize, rho: f64, rng: &mut impl Rng) -> Result<Mat> {
    if !(0.0..1.0).contains(&rho) {
        return Err(NpivError::Domain(format!("rho = {rho} outside [0, 1)")));
    }
    let innov = (1.0 - rho * rho).sqrt();
    let mut z = vec![0.0; d];
    let mut out = Mat::zeros(n, d);
    for t in 0..n {
        for a in 0..d {
            let e: f64 = StandardNormal.sample(rng);
            z[a] = if t == 0 { e } else { rho * z[a] + innov * e };
            out[(t, a)] = normal_cdf(z[a]);
        }
    }
    Ok(out)
}

fn assemble(dgp: &NpivDgp, y2: Mat, x: Mat, seed: u64) -> Result<Sample> {
    let n = y2.rows();
    let eps = draw_noise(&dgp.config.noise, n, seed)?;
    let y1 = (0..n).map(|i| dgp.h0_point(y2.row(i)) + eps[i]).collect();
    Sample::new(y1, y2, x)
}

/// i.i.d. sample; regressors and rejection proposals use stream 0 of `seed`, noise stream 1.
pub fn sample_iid(dgp: &NpivDgp, n: usize, seed: u64) -> Result<Sample> {
    if n == 0 {
        return Err(NpivError::Domain("sample size must be positive".into()));
    }
    if dgp.min_density < MIN_DENSITY {
        return Err(NpivError::Config(format!(
            "joint density reaches {:.4} < {MIN_DENSITY}; reduce the profile scale",
            dgp.min_density
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = dgp.d();
    match dgp.config.design {
        Design::Regression => {
            let x = ar_copula_regressors(n, d, 0.0, &mut rng)?;
            assemble(dgp, x.clone(), x, seed)
        }
        Design::Npiv => {
            let mut x = Mat::zeros(n, d);
            let mut y2 = Mat::zeros(n, d);
            let m = dgp.envelope;
            for i in 0..n {
                for a in 0..d {
                    loop {
                        let xa: f64 = rng.random();
                        let ya: f64 = rng.random();
                        let u: f64 = rng.random();
                        if u * m <= dgp.axis_density(xa, ya) {
                            x[(i, a)] = xa;
                            y2[(i, a)] = ya;
                            break;
                        }
                    }
                }
            }
            assemble(dgp, y2, x, seed)
        }
    }
}

/// Regression sample with AR(1)-copula regressors; `rho = 0` reproduces [`sample_iid`] bit for bit.
pub fn sample_mixing(dgp: &NpivDgp, n: usize, rho: f64, seed: u64) -> Result<Sample> {
    if !(0.0..1.0).contains(&rho) {
        return Err(NpivError::Domain(format!("rho = {rho} outside [0, 1)")));
    }
    if dgp.config.design != Design::Regression {
        return Err(NpivError::Contract(
            "mixing samples are only defined for the regression design".into(),
        ));
    }
    if n == 0 {
        return Err(NpivError::Domain("sample size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = ar_copula_regressors(n, dgp.d(), rho, &mut rng)?;
    assemble(dgp, x.clone(), x, seed)
}

/// Whether `(2+γ)d < 2γp`, the regressor condition for algebraically β-mixing designs.
pub fn algebraic_mixing_condition(d: usize, p: f64, gamma: f64) -> bool {
    (2.0 + gamma) * (d as f64) < 2.0 * gamma * p
}
