use serde::{Deserialize, Serialize};

use crate::error::{NpivError, Result};
use crate::numerics::{min_eig_sym, pinv_with_rank, spectral_norm, svd, sym_eigen, Mat};
use crate::sieve::{orthonormalize, Basis, BasisHandle, Measure, MeasureKind, SieveSpec};

use super::sample::Sample;

/// Relative singular-value cutoff for every pseudoinverse inside the estimator.
pub const ESTIMATOR_PINV_REL_TOL: f64 = 1e-10;

/// Measure used to orthonormalize the sieve bases before fitting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orthonormalization {
    /// Empirical Gram of the sample itself.
    #[default]
    Empirical,
    /// Population Gram under the uniform measure on [0,1]^d.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub orthonormalization: Orthonormalization,
    pub pinv_rel_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            orthonormalization: Orthonormalization::Empirical,
            pinv_rel_tol: ESTIMATOR_PINV_REL_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    Ls,
    Npiv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n: usize,
    pub j: usize,
    pub k: usize,
    /// Smallest singular value of `Ŝ = Ψ̃'B̃/n`.
    pub sigma_hat_jk: f64,
    /// Largest singular value of `Ŝ`.
    pub sigma_hat_max: f64,
    /// `‖B̃'B̃/n − I_K‖`.
    pub ident_stat_b: f64,
    /// `‖Ψ̃'Ψ̃/n − I_J‖`.
    pub ident_stat_psi: f64,
    /// Smallest eigenvalue of `Ŝ (B̃'B̃/n)⁻ Ŝ'`.
    pub denom_min_eig: f64,
    /// Whether the pseudoinverse of `B̃'B̃/n` dropped singular values.
    pub gram_truncated: bool,
    pub orthonormalization: Orthonormalization,
    pub warnings: Vec<String>,
}

/// Fitted sieve estimator; predictions are `ψ̃(y₂)'·coef`.
#[derive(Debug, Clone)]
pub struct NpivFit {
    pub mode: FitMode,
    pub coef: Vec<f64>,
    pub psi_handle: BasisHandle,
    pub b_handle: BasisHandle,
    pub diag: Diagnostics,
}

impl NpivFit {
    /// Coefficients on the raw (not orthonormalized) ψ basis.
    pub fn raw_coef(&self) -> Vec<f64> {
        self.psi_handle.transform().t_matvec(&self.coef)
    }

    pub fn domain_dim(&self) -> usize {
        self.psi_handle.basis().domain_dim()
    }

    pub fn predict_point(&self, point: &[f64]) -> Result<f64> {
        let v = self.psi_handle.eval(point)?;
        Ok(v.iter().zip(&self.coef).map(|(a, b)| a * b).sum())
    }

    /// One prediction per row of `points`.
    pub fn predict(&self, points: &Mat) -> Result<Vec<f64>> {
        if points.cols() != self.domain_dim() {
            return Err(NpivError::Domain(format!(
                "points have dimension {}, fit has {}",
                points.cols(),
                self.domain_dim()
            )));
        }
        let raw = self.psi_handle.basis().design(points)?;
        Ok(raw.matvec(&self.raw_coef()))
    }
}

/// JSON export of a fit: spec block, coefficients and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub mode: FitMode,
    pub psi_spec: SieveSpec,
    pub b_spec: SieveSpec,
    /// Coefficients on the orthonormalized ψ̃ basis.
    pub coef: Vec<f64>,
    /// Coefficients on the raw ψ basis.
    pub raw_coef: Vec<f64>,
    pub diagnostics: Diagnostics,
}

impl NpivFit {
    pub fn report(&self) -> FitReport {
        FitReport {
            mode: self.mode,
            psi_spec: self.psi_handle.spec().clone(),
            b_spec: self.b_handle.spec().clone(),
            coef: self.coef.clone(),
            raw_coef: self.raw_coef(),
            diagnostics: self.diag.clone(),
        }
    }
}

/// Estimator in orthonormalized coordinates for fixed designs `Ψ̃` (n×J) and `B̃` (n×K);
/// the map `Y ↦ coef` is linear and is precomputed once.
#[derive(Debug, Clone)]
pub struct NpivSystem {
    n: usize,
    b_tilde: Mat,
    map: Mat,
    diag: Diagnostics,
}

fn ident_stat(design: &Mat) -> Result<(Mat, f64)> {
    let n = design.rows() as f64;
    let mut g = design.t_matmul(design).scale(1.0 / n);
    g.symmetrize();
    let dev = g.sub(&Mat::identity(g.rows()));
    let stat = spectral_norm(&dev)?;
    Ok((g, stat))
}

impl NpivSystem {
    /// NPIV system: `coef = [Ŝ G⁻ Ŝ']⁻ Ŝ G⁻ B̃'Y/n` with `G = B̃'B̃/n`.
    pub fn npiv(psi_tilde: &Mat, b_tilde: &Mat, opts: &FitOptions) -> Result<Self> {
        let (n, j) = psi_tilde.shape();
        let k = b_tilde.cols();
        if b_tilde.rows() != n {
            return Err(NpivError::Domain("Ψ̃ and B̃ have different row counts".into()));
        }
        if j > k {
            return Err(NpivError::Contract(format!("J = {j} exceeds K = {k}")));
        }
        if k > n {
            return Err(NpivError::Contract(format!("K = {k} exceeds n = {n}")));
        }
        let (gb, ident_stat_b) = ident_stat(b_tilde)?;
        let (_, ident_stat_psi) = ident_stat(psi_tilde)?;
        let s_hat = psi_tilde.t_matmul(b_tilde).scale(1.0 / n as f64);
        let sv = svd(&s_hat)?;
        let sigma_hat_jk = sv.min_singular_value();
        let sigma_hat_max = sv.max_singular_value();

        let (gb_inv, dropped) = pinv_with_rank(&gb, opts.pinv_rel_tol)?;
        let s_g = s_hat.matmul(&gb_inv);
        let mut denom = s_g.matmul(&s_hat.transpose());
        denom.symmetrize();
        let eig = sym_eigen(&denom)?;
        let denom_min_eig = eig.values.first().copied().unwrap_or(0.0);
        let denom_max_eig = eig.values.last().copied().unwrap_or(0.0);
        if !(denom_min_eig > opts.pinv_rel_tol * denom_max_eig) {
            return Err(NpivError::IllPosed {
                sigma_hat_jk,
                denom_min_eig,
            });
        }
        let (denom_inv, _) = pinv_with_rank(&denom, opts.pinv_rel_tol)?;
        let map = denom_inv.matmul(&s_g);
        let mut warnings = Vec::new();
        if dropped > 0 {
            warnings.push(format!(
                "pseudoinverse of B'B/n dropped {dropped} of {k} singular values"
            ));
        }
        Ok(Self {
            n,
            b_tilde: b_tilde.clone(),
            map,
            diag: Diagnostics {
                n,
                j,
                k,
                sigma_hat_jk,
                sigma_hat_max,
                ident_stat_b,
                ident_stat_psi,
                denom_min_eig,
                gram_truncated: dropped > 0,
                orthonormalization: opts.orthonormalization,
                warnings,
            },
        })
    }

    /// Least-squares system `coef = (B̃'B̃)⁻ B̃'Y`, computed directly rather than through the NPIV formula.
    pub fn least_squares(b_tilde: &Mat, opts: &FitOptions) -> Result<Self> {
        let (n, k) = b_tilde.shape();
        if k > n {
            return Err(NpivError::Contract(format!("K = {k} exceeds n = {n}")));
        }
        let (gb, ident) = ident_stat(b_tilde)?;
        let eig = sym_eigen(&gb)?;
        let min_eig = eig.values.first().copied().unwrap_or(0.0);
        let max_eig = eig.values.last().copied().unwrap_or(0.0);
        if !(min_eig > opts.pinv_rel_tol * max_eig) {
            return Err(NpivError::RankDeficient { min_eig });
        }
        let mut btb = b_tilde.t_matmul(b_tilde);
        btb.symmetrize();
        let (btb_inv, _) = pinv_with_rank(&btb, opts.pinv_rel_tol)?;
        // map acts on B̃'Y/n, so rescale by n
        let map = btb_inv.scale(n as f64);
        Ok(Self {
            n,
            b_tilde: b_tilde.clone(),
            map,
            diag: Diagnostics {
                n,
                j: k,
                k,
                sigma_hat_jk: min_eig,
                sigma_hat_max: max_eig,
                ident_stat_b: ident,
                ident_stat_psi: ident,
                denom_min_eig: min_eig,
                gram_truncated: false,
                orthonormalization: opts.orthonormalization,
                warnings: Vec::new(),
            },
        })
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diag
    }

    /// Coefficients for outcome vector `y`.
    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.n {
            return Err(NpivError::Domain(format!(
                "outcome has length {}, system has n = {}",
                y.len(),
                self.n
            )));
        }
        let by = self.b_tilde.t_matvec(y);
        let by: Vec<f64> = by.iter().map(|v| v / self.n as f64).collect();
        Ok(self.map.matvec(&by))
    }
}

/// Orthonormalized handle for `spec` together with the orthonormalized design at `points`.
pub fn orthonormal_design(
    spec: &SieveSpec,
    points: &Mat,
    orth: Orthonormalization,
) -> Result<(BasisHandle, Mat)> {
    let basis = Basis::new(spec)?;
    if basis.domain_dim() != points.cols() {
        return Err(NpivError::Domain(format!(
            "basis `{spec}` has dimension {}, data has {}",
            basis.domain_dim(),
            points.cols()
        )));
    }
    let raw = basis.design(points)?;
    let handle = match orth {
        Orthonormalization::Empirical => {
            let n = points.rows() as f64;
            let mut g = raw.t_matmul(&raw).scale(1.0 / n);
            g.symmetrize();
            match BasisHandle::from_gram(basis, g.clone(), MeasureKind::EmpiricalSample) {
                Ok(h) => h,
                Err(_) => {
                    return Err(NpivError::RankDeficient {
                        min_eig: min_eig_sym(&g)?,
                    })
                }
            }
        }
        Orthonormalization::Uniform => orthonormalize(spec, &Measure::Uniform)?,
    };
    let tilde = raw.matmul(handle.transform());
    Ok((handle, tilde))
}

/// Prepared estimator for one sample and pair of sieve specs; reusable across outcome vectors.
#[derive(Debug, Clone)]
pub struct NpivSolver {
    mode: FitMode,
    psi_handle: BasisHandle,
    b_handle: BasisHandle,
    system: NpivSystem,
}

fn smoothness_warnings(specs: &[&SieveSpec], p: Option<f64>) -> Vec<String> {
    p.map(|p| {
        specs
            .iter()
            .filter_map(|s| s.smoothness_warning(p))
            .collect()
    })
    .unwrap_or_default()
}

impl NpivSolver {
    pub fn npiv(
        sample: &Sample,
        psi_spec: &SieveSpec,
        b_spec: &SieveSpec,
        opts: &FitOptions,
    ) -> Result<Self> {
        let (j, k) = (psi_spec.dim(), b_spec.dim());
        if j > k {
            return Err(NpivError::Contract(format!("J = {j} exceeds K = {k}")));
        }
        if k > sample.n() {
            return Err(NpivError::Contract(format!("K = {k} exceeds n = {}", sample.n())));
        }
        let (psi_handle, psi_tilde) =
            orthonormal_design(psi_spec, sample.y2(), opts.orthonormalization)?;
        let (b_handle, b_tilde) = orthonormal_design(b_spec, sample.x(), opts.orthonormalization)?;
        let system = NpivSystem::npiv(&psi_tilde, &b_tilde, opts)?;
        Ok(Self {
            mode: FitMode::Npiv,
            psi_handle,
            b_handle,
            system,
        })
    }

    /// Series least squares of `y1` on `b(X)`.
    pub fn least_squares(sample: &Sample, b_spec: &SieveSpec, opts: &FitOptions) -> Result<Self> {
        if b_spec.dim() > sample.n() {
            return Err(NpivError::Contract(format!(
                "K = {} exceeds n = {}",
                b_spec.dim(),
                sample.n()
            )));
        }
        let (b_handle, b_tilde) = orthonormal_design(b_spec, sample.x(), opts.orthonormalization)?;
        let system = NpivSystem::least_squares(&b_tilde, opts)?;
        Ok(Self {
            mode: FitMode::Ls,
            psi_handle: b_handle.clone(),
            b_handle,
            system,
        })
    }

    /// Attaches smoothness warnings for a target smoothness `p`.
    pub fn with_smoothness(mut self, p: f64) -> Self {
        let w = smoothness_warnings(&[self.psi_handle.spec(), self.b_handle.spec()], Some(p));
        for msg in w {
            if !self.system.diag.warnings.contains(&msg) {
                self.system.diag.warnings.push(msg);
            }
        }
        self
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        self.system.diagnostics()
    }

    pub fn system(&self) -> &NpivSystem {
        &self.system
    }

    pub fn fit(&self, y: &[f64]) -> Result<NpivFit> {
        Ok(NpivFit {
            mode: self.mode,
            coef: self.system.solve(y)?,
            psi_handle: self.psi_handle.clone(),
            b_handle: self.b_handle.clone(),
            diag: self.system.diagnostics().clone(),
        })
    }
}

pub fn fit_sieve_ls(sample: &Sample, b_spec: &SieveSpec) -> Result<NpivFit> {
    fit_sieve_ls_with(sample, b_spec, &FitOptions::default())
}

pub fn fit_sieve_ls_with(sample: &Sample, b_spec: &SieveSpec, opts: &FitOptions) -> Result<NpivFit> {
    NpivSolver::least_squares(sample, b_spec, opts)?.fit(sample.y1())
}

pub fn fit_sieve_npiv(sample: &Sample, psi_spec: &SieveSpec, b_spec: &SieveSpec) -> Result<NpivFit> {
    fit_sieve_npiv_with(sample, psi_spec, b_spec, &FitOptions::default())
}

pub fn fit_sieve_npiv_with(
    sample: &Sample,
    psi_spec: &SieveSpec,
    b_spec: &SieveSpec,
    opts: &FitOptions,
) -> Result<NpivFit> {
    NpivSolver::npiv(sample, psi_spec, b_spec, opts)?.fit(sample.y1())
}

/// NPIV formula with `Y` replaced by `h₀` evaluated at the sample's `Y2` rows.
pub fn empirical_projection(
    sample: &Sample,
    psi_spec: &SieveSpec,
    b_spec: &SieveSpec,
    h_values: &[f64],
) -> Result<NpivFit> {
    empirical_projection_with(sample, psi_spec, b_spec, h_values, &FitOptions::default())
}

pub fn empirical_projection_with(
    sample: &Sample,
    psi_spec: &SieveSpec,
    b_spec: &SieveSpec,
    h_values: &[f64],
    opts: &FitOptions,
) -> Result<NpivFit> {
    NpivSolver::npiv(sample, psi_spec, b_spec, opts)?.fit(h_values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_sample(n: usize) -> Sample {
        let x = Mat::from_fn(n, 1, |i, _| (i as f64 + 0.5) / n as f64);
        let y = (0..n).map(|i| (i % 7) as f64 - 3.0).collect();
        Sample::regression(y, x).unwrap()
    }

    #[test]
    fn constant_basis_gives_mean() {
        let s = grid_sample(50);
        let mean = s.y1().iter().sum::<f64>() / 50.0;
        let fit = fit_sieve_ls(&s, &"constant".parse().unwrap()).unwrap();
        for p in [0.0, 0.3, 1.0] {
            assert!((fit.predict_point(&[p]).unwrap() - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn contract_errors() {
        let s = grid_sample(20);
        let big = SieveSpec::bspline(4, 6).unwrap();
        let small = SieveSpec::bspline(2, 1).unwrap();
        assert!(matches!(fit_sieve_npiv(&s, &big, &small), Err(NpivError::Contract(_))));
        let huge = SieveSpec::bspline(4, 30).unwrap();
        assert!(matches!(fit_sieve_ls(&s, &huge), Err(NpivError::Contract(_))));
    }

    #[test]
    fn rank_deficient_design() {
        // all points in one knot interval: only 2 of 4 linear splines are active
        let x = Mat::from_fn(30, 1, |i, _| 0.01 + 0.001 * i as f64);
        let s = Sample::regression(vec![1.0; 30], x).unwrap();
        let err = fit_sieve_ls(&s, &SieveSpec::bspline(2, 2).unwrap()).unwrap_err();
        assert!(matches!(err, NpivError::RankDeficient { .. }));
    }

    #[test]
    fn instrument_orthogonal_to_regressor_is_ill_posed() {
        // every Y2 value appears once with each X cell, so Ŝ has identical columns
        let n = 64;
        let y2 = Mat::from_fn(n, 1, |i, _| ((i / 2) as f64 + 0.5) / (n / 2) as f64);
        let x = Mat::from_fn(n, 1, |i, _| if i % 2 == 0 { 0.25 } else { 0.75 });
        let s = Sample::new(vec![0.0; n], y2, x).unwrap();
        let psi = SieveSpec::bspline(2, 0).unwrap();
        let b = SieveSpec::bspline(1, 1).unwrap();
        let err = fit_sieve_npiv(&s, &psi, &b).unwrap_err();
        assert!(matches!(err, NpivError::IllPosed { .. }));
    }
}
