use npiv_core::dgp::{sample_iid, Dependence, Design, DgpConfig, NoiseSpec, NpivDgp};
use npiv_core::estimators::{FitOptions, NpivSolver, Orthonormalization};
use npiv_core::illposedness::{
    default_population_rule, population_s, sigma_jk_from_s, tau_22, IllPosednessProfile,
};
use npiv_core::numerics::{gauss_legendre, Mat};
use npiv_core::sieve::{orthonormalize, Measure, SieveSpec};
use npiv_core::NpivError;

fn dgp(profile: IllPosednessProfile) -> NpivDgp {
    NpivDgp::new(DgpConfig {
        design: Design::Npiv,
        profile: Some(profile),
        p: 2.0,
        c_a: 0.02,
        d: 1,
        k_trunc: 200,
        noise: NoiseSpec::gaussian(0.006),
        dependence: Dependence::Iid,
    })
    .unwrap()
}

fn uniform(spec: &str) -> npiv_core::sieve::BasisHandle {
    orthonormalize(&spec.parse().unwrap(), &Measure::Uniform).unwrap()
}

#[test]
fn aligned_cosine_population_s_is_diagonal_spectrum() {
    let g = dgp(IllPosednessProfile::mild(1.0, 0.6).unwrap());
    let h = uniform("cosine:terms=8");
    let s = population_s(&g, &h, &h, &default_population_rule()).unwrap();
    let mut want = Mat::zeros(8, 8);
    want[(0, 0)] = 1.0;
    for k in 1..8 {
        want[(k, k)] = g.mu()[k - 1];
    }
    assert!(s.sub(&want).max_abs() < 1e-6, "{:e}", s.sub(&want).max_abs());
    let sigma = sigma_jk_from_s(&s).unwrap();
    let mu_j = g.config().profile.as_ref().unwrap().operator_singular_value(8);
    assert!((sigma - mu_j).abs() < 1e-6);
    let tau = tau_22(&g, &h, &default_population_rule()).unwrap();
    assert!((tau - 1.0 / mu_j).abs() / tau < 1e-6);
}

#[test]
fn independence_dgp_population_s() {
    let g = dgp(IllPosednessProfile::mild(1.0, 0.0).unwrap());
    let psi = uniform("bspline:order=3,knots=3");
    let b = uniform("bspline:order=4,knots=4");
    let s = population_s(&g, &psi, &b, &default_population_rule()).unwrap();
    // only the projection onto constants survives: S = m_ψ m_b' with m = E[ψ̃]
    let rank_one_sv = npiv_core::numerics::svd(&s).unwrap().singular_values;
    assert!((rank_one_sv[0] - 1.0).abs() < 1e-9);
    assert!(rank_one_sv[1..].iter().all(|&v| v < 1e-9));
}

#[test]
fn lemma_chain_on_misaligned_splines() {
    for profile in [
        IllPosednessProfile::mild(1.0, 0.6).unwrap(),
        IllPosednessProfile::severe(1.0, 1.0).unwrap(),
    ] {
        let g = dgp(profile.clone());
        for (j, k) in [(4usize, 5usize), (5, 8), (6, 12), (8, 16)] {
            let psi = orthonormalize(&SieveSpec::bspline_with_dim(4, j).unwrap(), &Measure::Uniform)
                .unwrap();
            let b = orthonormalize(&SieveSpec::bspline_with_dim(4, k).unwrap(), &Measure::Uniform)
                .unwrap();
            let rule = default_population_rule();
            let sigma = sigma_jk_from_s(&population_s(&g, &psi, &b, &rule).unwrap()).unwrap();
            let tau = tau_22(&g, &psi, &rule).unwrap();
            let inv_mu = 1.0 / profile.operator_singular_value(j);
            assert!(inv_mu <= tau * (1.0 + 1e-9), "J={j}: 1/μ {inv_mu} > τ {tau}");
            assert!(tau <= (1.0 / sigma) * (1.0 + 1e-9), "J={j}: τ {tau} > 1/σ {}", 1.0 / sigma);
        }
    }
}

#[test]
fn sigma_inverse_is_non_decreasing_in_j() {
    let g = dgp(IllPosednessProfile::mild(1.0, 0.6).unwrap());
    let b = orthonormalize(&SieveSpec::bspline(4, 10).unwrap(), &Measure::Uniform).unwrap();
    let rule = default_population_rule();
    let mut prev = 0.0;
    for j in 2..=14 {
        let psi = orthonormalize(&SieveSpec::bspline_with_dim(4, j.max(4)).unwrap(), &Measure::Uniform)
            .unwrap();
        if psi.dim() < j {
            continue;
        }
        let inv = 1.0 / sigma_jk_from_s(&population_s(&g, &psi, &b, &rule).unwrap()).unwrap();
        assert!(inv >= prev * (1.0 - 1e-6), "J={j}");
        prev = inv;
    }
}

#[test]
fn mild_slope_of_sigma_inverse_in_j() {
    let g = dgp(IllPosednessProfile::mild(1.0, 0.6).unwrap());
    let rule = default_population_rule();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for j in [4usize, 8, 16, 32, 64] {
        let h = orthonormalize(&SieveSpec::cosine(j).unwrap(), &Measure::Uniform).unwrap();
        let s = population_s(&g, &h, &h, &rule).unwrap();
        xs.push((j as f64).ln());
        ys.push((1.0 / sigma_jk_from_s(&s).unwrap()).ln());
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope - 1.0).abs() <= 0.1, "slope {slope}");
}

#[test]
fn sample_s_hat_within_five_percent() {
    let g = dgp(IllPosednessProfile::mild(1.0, 0.6).unwrap());
    let s = sample_iid(&g, 100_000, 5).unwrap();
    let spec = SieveSpec::cosine(4).unwrap();
    let opts = FitOptions {
        orthonormalization: Orthonormalization::Uniform,
        ..FitOptions::default()
    };
    let solver = NpivSolver::npiv(&s, &spec, &spec, &opts).unwrap();
    let mu_j = g.config().profile.as_ref().unwrap().operator_singular_value(4);
    let rel = (solver.diagnostics().sigma_hat_jk - mu_j).abs() / mu_j;
    assert!(rel <= 0.05, "relative error {rel}");
}

#[test]
fn coarse_rule_is_a_resolution_error() {
    let g = dgp(IllPosednessProfile::mild(1.0, 0.6).unwrap());
    let h = uniform("wavelet:taps=4,coarse=2,fine=5");
    let coarse = gauss_legendre(2, 16).unwrap();
    assert!(matches!(population_s(&g, &h, &h, &coarse), Err(NpivError::Numeric(_))));
}

#[test]
fn regression_design_has_unit_ill_posedness() {
    let g = NpivDgp::new(DgpConfig {
        design: Design::Regression,
        profile: None,
        p: 2.0,
        c_a: 1.0,
        d: 1,
        k_trunc: 200,
        noise: NoiseSpec::gaussian(1.0),
        dependence: Dependence::Iid,
    })
    .unwrap();
    assert_eq!(tau_22(&g, &uniform("bspline:order=4,knots=3"), &default_population_rule()).unwrap(), 1.0);
}
