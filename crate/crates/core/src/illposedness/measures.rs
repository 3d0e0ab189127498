use crate::dgp::{Design, NpivDgp};
use crate::error::{NpivError, Result};
use crate::numerics::{gauss_legendre, inv_sqrt_psd, svd, sym_eigen, Mat, QuadratureRule};
use crate::sieve::{orthonormalize, BasisHandle, Measure, MeasureKind, SieveSpec};

/// Largest deviation of the quadrature Gram of an orthonormalized basis from `I` that is
/// still accepted as "resolved" by [`population_s`] and [`tau_22`].
pub const RESOLUTION_TOL: f64 = 1e-6;

/// Default univariate rule for population quantities: 2^10 Gauss–Legendre nodes.
pub fn default_population_rule() -> QuadratureRule {
    gauss_legendre(8, 128).expect("valid rule")
}

/// Smallest singular value of a J×K matrix with J ≤ K.
pub fn sigma_jk_from_s(s: &Mat) -> Result<f64> {
    let (j, k) = s.shape();
    if j > k {
        return Err(NpivError::Contract(format!("S is {j}×{k} with J > K")));
    }
    if j == 0 {
        return Err(NpivError::Domain("S is empty".into()));
    }
    Ok(svd(s)?.min_singular_value())
}

/// Per-axis univariate handles of a tensor handle orthonormalized under the uniform measure.
fn axis_handles(handle: &BasisHandle) -> Result<Vec<BasisHandle>> {
    if handle.spec().domain_dim() == 1 {
        return Ok(vec![handle.clone()]);
    }
    if handle.measure() != MeasureKind::Uniform {
        return Err(NpivError::Contract(
            "multivariate population quantities need handles orthonormalized under the uniform measure"
                .into(),
        ));
    }
    handle
        .spec()
        .axes()
        .iter()
        .map(|a| orthonormalize(&SieveSpec::univariate(a.clone())?, &Measure::Uniform))
        .collect()
}

/// Moments `∫ ψ̃_j φ_m` for `m = 0..=L` (φ_0 = 1) under `rule`, after checking that the rule
/// resolves the basis (its quadrature Gram is `I` within [`RESOLUTION_TOL`]).
fn cosine_moments(handle: &BasisHandle, l: usize, rule: &QuadratureRule) -> Result<Mat> {
    let nodes = Mat::new(rule.len(), 1, rule.nodes.clone())?;
    let design = handle.design(&nodes)?;
    let k = design.cols();
    let mut gram = Mat::zeros(k, k);
    let mut mom = Mat::zeros(k, l + 1);
    let r2 = std::f64::consts::SQRT_2;
    let mut phi = vec![0.0; l + 1];
    for (i, (&x, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        phi[0] = 1.0;
        for (m, v) in phi.iter_mut().enumerate().skip(1) {
            *v = r2 * (m as f64 * std::f64::consts::PI * x).cos();
        }
        let row = design.row(i);
        for a in 0..k {
            let wa = w * row[a];
            for b in 0..k {
                gram[(a, b)] += wa * row[b];
            }
            for m in 0..=l {
                mom[(a, m)] += wa * phi[m];
            }
        }
    }
    let dev = gram.sub(&Mat::identity(k)).max_abs();
    if dev > RESOLUTION_TOL {
        return Err(NpivError::Numeric(format!(
            "quadrature resolution insufficient: Gram of orthonormalized basis deviates from I by {dev:e}"
        )));
    }
    Ok(mom)
}

/// Operator singular values `1, μ_1, …, μ_L` of one axis.
fn axis_spectrum(dgp: &NpivDgp) -> Vec<f64> {
    std::iter::once(1.0).chain(dgp.mu().iter().copied()).collect()
}

/// `S = E[ψ̃(Y2) b̃(X)']` under the DGP's joint density, by quadrature on the cosine expansion
/// `f(x, y) = Σ_m μ_m φ_m(x) φ_m(y)` (axis-wise, tensor products combined by Kronecker products).
pub fn population_s(
    dgp: &NpivDgp,
    psi: &BasisHandle,
    b: &BasisHandle,
    rule: &QuadratureRule,
) -> Result<Mat> {
    if dgp.config().design != Design::Npiv {
        return Err(NpivError::Contract("population S needs the NPIV design".into()));
    }
    let d = dgp.d();
    if psi.spec().domain_dim() != d || b.spec().domain_dim() != d {
        return Err(NpivError::Domain("basis and DGP dimensions differ".into()));
    }
    let spectrum = axis_spectrum(dgp);
    let l = spectrum.len() - 1;
    let psi_axes = axis_handles(psi)?;
    let b_axes = axis_handles(b)?;
    let mut s = Mat::identity(1);
    for (ph, bh) in psi_axes.iter().zip(&b_axes) {
        let mp = cosine_moments(ph, l, rule)?;
        let mb = cosine_moments(bh, l, rule)?;
        let scaled = Mat::from_fn(mp.rows(), l + 1, |j, m| mp[(j, m)] * spectrum[m]);
        s = s.kron(&scaled.matmul(&mb.transpose()));
    }
    Ok(s)
}

/// `τ_{2,2,J} = sup_{h ∈ Ψ_J} ‖h‖ / ‖Th‖`, from the Galerkin matrices `E[ψ̃ψ̃']` and `E[(Tψ̃)(Tψ̃)']`.
pub fn tau_22(dgp: &NpivDgp, psi: &BasisHandle, rule: &QuadratureRule) -> Result<f64> {
    if dgp.config().design == Design::Regression {
        return Ok(1.0);
    }
    if psi.spec().domain_dim() != dgp.d() {
        return Err(NpivError::Domain("basis and DGP dimensions differ".into()));
    }
    let spectrum = axis_spectrum(dgp);
    let l = spectrum.len() - 1;
    let mut tau = 1.0;
    for ph in axis_handles(psi)? {
        let mp = cosine_moments(&ph, l, rule)?;
        let j = mp.rows();
        // E[(Tψ̃)(Tψ̃)'] = Σ_m μ_m² ⟨ψ̃, φ_m⟩⟨ψ̃, φ_m⟩'
        let mut t_gram = Mat::from_fn(j, j, |a, b| {
            (0..=l).map(|m| spectrum[m] * spectrum[m] * mp[(a, m)] * mp[(b, m)]).sum()
        });
        t_gram.symmetrize();
        let nodes = Mat::new(rule.len(), 1, rule.nodes.clone())?;
        let design = ph.design(&nodes)?;
        let mut g = Mat::zeros(j, j);
        for (i, &w) in rule.weights.iter().enumerate() {
            let row = design.row(i);
            for a in 0..j {
                for b in 0..j {
                    g[(a, b)] += w * row[a] * row[b];
                }
            }
        }
        g.symmetrize();
        let g_is = inv_sqrt_psd(&g)?;
        let mut r = g_is.matmul(&t_gram).matmul(&g_is);
        r.symmetrize();
        let lmin = sym_eigen(&r)?.values[0];
        if !(lmin > 0.0) {
            return Err(NpivError::IllPosed {
                sigma_hat_jk: 0.0,
                denom_min_eig: lmin,
            });
        }
        tau *= 1.0 / lmin.sqrt();
    }
    Ok(tau)
}
