use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::{ar_copula_regressors, Dependence};
use crate::error::{NpivError, Result};
use crate::numerics::{gauss_legendre, spectral_norm, sym_eigen, Mat};
use crate::sieve::{orthonormalize, weighted_gram, zeta0, BasisHandle, Measure, SieveSpec};

use super::bounds::{beta_tropp_tail, gaussian_ar_beta, tropp_tail, wilson_interval, BoundParams, Z_99, Z_VIOLATION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleKind {
    /// `Ξ_i = (b̃(X_i) b̃(X_i)' − I_K)/n` with `b̃` orthonormal under the uniform law of `X_i`.
    GramDeviation { basis: SieveSpec },
    /// Summands supplied by the caller through [`simulate_norms`].
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    #[serde(flatten)]
    pub kind: EnsembleKind,
    pub n: usize,
    pub dims: (usize, usize),
    #[serde(default)]
    pub dependence: Dependence,
}

impl EnsembleSpec {
    pub fn gram_deviation(basis: SieveSpec, n: usize, dependence: Dependence) -> Result<Self> {
        let k = basis.dim();
        let spec = Self {
            kind: EnsembleKind::GramDeviation { basis },
            n,
            dims: (k, k),
            dependence,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.dims.0 == 0 || self.dims.1 == 0 {
            return Err(NpivError::Config("ensemble needs n ≥ 1 and non-empty dimensions".into()));
        }
        if let EnsembleKind::GramDeviation { basis } = &self.kind {
            if self.dims != (basis.dim(), basis.dim()) {
                return Err(NpivError::Config("Gram ensemble dims must equal (K, K)".into()));
            }
        }
        if let Dependence::GaussianCopulaAr { rho } = self.dependence {
            if !(0.0..1.0).contains(&rho) {
                return Err(NpivError::Domain(format!("rho = {rho} outside [0, 1)")));
            }
        }
        Ok(())
    }

    pub fn rho(&self) -> f64 {
        match self.dependence {
            Dependence::Iid => 0.0,
            Dependence::GaussianCopulaAr { rho } => rho,
        }
    }
}

/// `B̃'B̃/n − I_K` for the orthonormalized design at the rows of `sample_x`.
pub fn empirical_gram_deviation(sample_x: &Mat, handle: &BasisHandle) -> Result<Mat> {
    let n = sample_x.rows();
    if n == 0 {
        return Err(NpivError::Domain("identifiability statistic of an empty sample".into()));
    }
    let raw = handle.basis().design(sample_x)?;
    let g = weighted_gram(&raw, &vec![1.0 / n as f64; n]);
    let t = handle.transform();
    let mut dev = t.matmul(&g).matmul(t).sub(&Mat::identity(handle.dim()));
    dev.symmetrize();
    Ok(dev)
}

/// Spectral norm `‖B̃'B̃/n − I_K‖`.
pub fn ident_stat(sample_x: &Mat, handle: &BasisHandle) -> Result<f64> {
    let dev = empirical_gram_deviation(sample_x, handle)?;
    let eig = sym_eigen(&dev)?;
    Ok(eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// `(1/n) Σ_i (c'b̃(X_i))² − 1` for the unit vector along `c`, evaluated from the data.
pub fn rayleigh_deviation(orth_design: &Mat, c: &[f64]) -> Result<f64> {
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    if c.len() != orth_design.cols() || norm == 0.0 {
        return Err(NpivError::Domain("Rayleigh direction must be non-zero of length K".into()));
    }
    let u: Vec<f64> = c.iter().map(|v| v / norm).collect();
    let n = orth_design.rows() as f64;
    Ok(orth_design.matvec(&u).iter().map(|v| v * v).sum::<f64>() / n - 1.0)
}

/// Largest `|rayleigh_deviation|` over `n_vectors` Gaussian random directions and over the
/// eigenvectors of the empirical Gram; returns `(random_max, eigvec_max)`.
pub fn rayleigh_brute_force(
    sample_x: &Mat,
    handle: &BasisHandle,
    n_vectors: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let d = handle.design(sample_x)?;
    let k = handle.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random_max = 0.0f64;
    let mut c = vec![0.0; k];
    for _ in 0..n_vectors {
        for v in c.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        random_max = random_max.max(rayleigh_deviation(&d, &c)?.abs());
    }
    let mut g = d.t_matmul(&d).scale(1.0 / d.rows() as f64);
    g.symmetrize();
    let eig = sym_eigen(&g)?;
    let mut eig_max = 0.0f64;
    for j in 0..k {
        eig_max = eig_max.max(rayleigh_deviation(&d, &eig.vectors.col(j))?.abs());
    }
    Ok((random_max, eig_max))
}

/// Runs `draw(base_seed + r)` for `r = 0..reps` and returns the results in replication order.
pub fn simulate_norms<F>(reps: usize, base_seed: u64, draw: F) -> Result<Vec<f64>>
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    (0..reps as u64)
        .into_par_iter()
        .map(|r| draw(base_seed.wrapping_add(r)))
        .collect()
}

/// Gram-deviation ensemble with its analytic bound parameters.
#[derive(Debug, Clone)]
pub struct GramEnsemble {
    spec: EnsembleSpec,
    handle: BasisHandle,
    zeta0: f64,
    /// `‖E[(b̃b̃' − I)²]‖ = ‖E[|b̃|² b̃b̃'] − I‖` under the uniform law.
    variance_norm: f64,
}

impl GramEnsemble {
    pub fn new(spec: EnsembleSpec) -> Result<Self> {
        spec.validate()?;
        let EnsembleKind::GramDeviation { basis } = &spec.kind else {
            return Err(NpivError::Config("custom ensembles have no built-in sampler".into()));
        };
        let handle = orthonormalize(basis, &Measure::Uniform)?;
        let d = basis.domain_dim();
        let grid = if d == 1 { 4097 } else { 257 };
        let zeta0 = zeta0(&handle, grid)?;
        let variance_norm = fourth_moment_deviation(&handle)?;
        Ok(Self {
            spec,
            handle,
            zeta0,
            variance_norm,
        })
    }

    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }

    pub fn handle(&self) -> &BasisHandle {
        &self.handle
    }

    pub fn zeta0(&self) -> f64 {
        self.zeta0
    }

    pub fn variance_norm(&self) -> f64 {
        self.variance_norm
    }

    /// `R_n = max(ζ₀² − 1, 1)/n`, `σ_n² = ‖E(b̃b̃'−I)²‖/n`, `s_n² = σ_n²/n`,
    /// `β(q)` from the AR(1) copula (zero for i.i.d.).
    pub fn bound_params(&self, q: usize) -> Result<BoundParams> {
        let n = self.spec.n as f64;
        let beta_q = match self.spec.dependence {
            Dependence::Iid => 0.0,
            Dependence::GaussianCopulaAr { rho } => {
                gaussian_ar_beta(rho, q, self.handle.spec().domain_dim())?
            }
        };
        let params = BoundParams {
            r_n: (self.zeta0 * self.zeta0 - 1.0).max(1.0) / n,
            sigma2_n: self.variance_norm / n,
            s2_n: self.variance_norm / (n * n),
            q,
            beta_q,
        };
        params.validate()?;
        Ok(params)
    }

    /// Regressors for replication seed `seed` (stream 0, AR copula with the ensemble's `rho`).
    pub fn draw_regressors(&self, seed: u64) -> Result<Mat> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ar_copula_regressors(self.spec.n, self.handle.spec().domain_dim(), self.spec.rho(), &mut rng)
    }

    /// `‖Σ_i Ξ_i‖` for one replication.
    pub fn draw_norm(&self, seed: u64) -> Result<f64> {
        ident_stat(&self.draw_regressors(seed)?, &self.handle)
    }

    pub fn simulate(&self, reps: usize, base_seed: u64) -> Result<Vec<f64>> {
        simulate_norms(reps, base_seed, |s| self.draw_norm(s))
    }
}

fn fourth_moment_deviation(handle: &BasisHandle) -> Result<f64> {
    let d = handle.spec().domain_dim();
    let rule = if d == 1 {
        gauss_legendre(8, 4096)?
    } else {
        gauss_legendre(4, 128)?
    };
    let m = rule.len();
    let total = m.pow(d as u32);
    let k = handle.dim();
    let mut pt = vec![0.0; d];
    let mut raw = Mat::zeros(total, k);
    let mut weights = vec![0.0; total];
    for p in 0..total {
        let mut rem = p;
        let mut w = 1.0;
        for a in (0..d).rev() {
            pt[a] = rule.nodes[rem % m];
            w *= rule.weights[rem % m];
            rem /= m;
        }
        handle.basis().eval_into(&pt, raw.row_mut(p))?;
        let orth = handle.transform().matvec(raw.row(p));
        weights[p] = w * orth.iter().map(|v| v * v).sum::<f64>();
    }
    let t = handle.transform();
    let mut moment = t.matmul(&weighted_gram(&raw, &weights)).matmul(t);
    moment.symmetrize();
    spectral_norm(&moment.sub(&Mat::identity(k)))
}

/// Empirical tail frequency against the analytic bound at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub t: f64,
    /// Level compared with `‖Σ Ξ_i‖`: `t` for independent, `6t` for mixing ensembles.
    pub threshold: f64,
    pub empirical: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub bound: f64,
    /// Lower end of the `z = 3` Wilson interval exceeds the bound.
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub n: usize,
    pub k: usize,
    pub dependence: Dependence,
    pub reps: usize,
    pub params: BoundParams,
    pub points: Vec<TailPoint>,
    pub violations: usize,
}

/// Compares the simulated tail of `‖Σ Ξ_i‖` with [`tropp_tail`] (i.i.d.) or
/// [`beta_tropp_tail`] (AR copula) on `grid_points` equispaced thresholds up to the
/// largest simulated norm.
pub fn tail_check(
    ensemble: &GramEnsemble,
    reps: usize,
    base_seed: u64,
    grid_points: usize,
    q: usize,
) -> Result<TailCheck> {
    if reps == 0 || grid_points == 0 {
        return Err(NpivError::Config("tail check needs reps ≥ 1 and grid_points ≥ 1".into()));
    }
    let spec = ensemble.spec();
    let params = ensemble.bound_params(q)?;
    let norms = ensemble.simulate(reps, base_seed)?;
    let top = norms.iter().cloned().fold(0.0f64, f64::max);
    let mixing = spec.dependence != Dependence::Iid;
    let scale = if mixing { 6.0 } else { 1.0 };
    let mut points = Vec::with_capacity(grid_points);
    for g in 1..=grid_points {
        let threshold = top * g as f64 / grid_points as f64;
        let t = threshold / scale;
        let hits = norms.iter().filter(|&&v| v >= threshold).count();
        let (lo, hi) = wilson_interval(hits, reps, Z_99);
        let bound = if mixing {
            beta_tropp_tail(t, &params, spec.dims, spec.n)?
        } else {
            tropp_tail(t, &params, spec.dims)?
        };
        let strict_lo = wilson_interval(hits, reps, Z_VIOLATION).0;
        points.push(TailPoint {
            t,
            threshold,
            empirical: hits as f64 / reps as f64,
            wilson_lo: lo,
            wilson_hi: hi,
            bound,
            violated: strict_lo > bound,
        });
    }
    let violations = points.iter().filter(|p| p.violated).count();
    Ok(TailCheck {
        n: spec.n,
        k: spec.dims.0,
        dependence: spec.dependence,
        reps,
        params,
        points,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_point_statistic() {
        let spec = SieveSpec::bspline(3, 2).unwrap();
        let handle = orthonormalize(&spec, &Measure::Uniform).unwrap();
        let x0 = 0.37;
        let pts = Mat::from_fn(25, 1, |_, _| x0);
        let b = handle.eval(&[x0]).unwrap();
        let k = b.len();
        let outer = Mat::from_fn(k, k, |i, j| b[i] * b[j]).sub(&Mat::identity(k));
        let want = spectral_norm(&outer).unwrap();
        assert!((ident_stat(&pts, &handle).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn ensemble_parameters_are_consistent() {
        let spec = EnsembleSpec::gram_deviation(SieveSpec::bspline_with_dim(4, 8).unwrap(), 400, Dependence::Iid)
            .unwrap();
        let e = GramEnsemble::new(spec).unwrap();
        assert!(e.zeta0() >= (8.0f64).sqrt() - 1e-9);
        let p = e.bound_params(1).unwrap();
        assert!((p.sigma2_n - 400.0 * p.s2_n).abs() < 1e-15);
        assert_eq!(p.beta_q, 0.0);
        assert!(p.r_n * 400.0 >= e.zeta0().powi(2) - 1.0 - 1e-12);
        // −I ⪯ E|b̃|²b̃b̃' − I ⪯ (ζ₀² − 1)I
        assert!(e.variance_norm() <= (e.zeta0().powi(2) - 1.0).max(1.0) + 1e-6);
        assert_eq!(e.draw_norm(5).unwrap(), e.draw_norm(5).unwrap());
    }

    #[test]
    fn custom_kind_has_no_sampler() {
        let spec = EnsembleSpec {
            kind: EnsembleKind::Custom,
            n: 10,
            dims: (2, 3),
            dependence: Dependence::Iid,
        };
        assert!(GramEnsemble::new(spec).is_err());
        let v = simulate_norms(4, 10, |s| Ok(s as f64)).unwrap();
        assert_eq!(v, vec![10.0, 11.0, 12.0, 13.0]);
    }
}
