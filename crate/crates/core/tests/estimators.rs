use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use npiv_core::dgp::{sample_iid, Dependence, Design, DgpConfig, NoiseSpec, NpivDgp};
use npiv_core::estimators::{
    empirical_projection, fit_sieve_ls, fit_sieve_ls_with, fit_sieve_npiv, fit_sieve_npiv_with,
    l2_distance, orthonormal_design, sup_norm_distance, FitOptions, NpivSolver, NpivSystem,
    Orthonormalization, Sample,
};
use npiv_core::illposedness::IllPosednessProfile;
use npiv_core::numerics::{gauss_legendre, inv_sqrt_psd, pinv, sym_eigen, Mat};
use npiv_core::sieve::{Basis, SieveSpec};

fn mild_dgp() -> NpivDgp {
    NpivDgp::new(DgpConfig {
        design: Design::Npiv,
        profile: Some(IllPosednessProfile::mild(1.0, 0.6).unwrap()),
        p: 2.0,
        c_a: 0.02,
        d: 1,
        k_trunc: 200,
        noise: NoiseSpec::gaussian(0.006),
        dependence: Dependence::Iid,
    })
    .unwrap()
}

fn regression_dgp(d: usize) -> NpivDgp {
    NpivDgp::new(DgpConfig {
        design: Design::Regression,
        profile: None,
        p: 2.0,
        c_a: 1.0,
        d,
        k_trunc: 200,
        noise: NoiseSpec::gaussian(0.5),
        dependence: Dependence::Iid,
    })
    .unwrap()
}

fn cos_fn(coef: &[f64]) -> impl Fn(&[f64]) -> f64 + '_ {
    move |p: &[f64]| {
        coef.iter()
            .enumerate()
            .map(|(k, c)| {
                let phi = if k == 0 {
                    1.0
                } else {
                    std::f64::consts::SQRT_2 * (k as f64 * std::f64::consts::PI * p[0]).cos()
                };
                c * phi
            })
            .sum()
    }
}

#[test]
fn npiv_with_y2_equal_x_matches_ls() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let dgp = regression_dgp(1);
    let mut worst = 0.0f64;
    for rep in 0..100 {
        let n = rng.random_range(60..400);
        let spec = SieveSpec::bspline(rng.random_range(2..=5), rng.random_range(0..=6)).unwrap();
        let sample = sample_iid(&dgp, n, rep).unwrap();
        for orth in [Orthonormalization::Empirical, Orthonormalization::Uniform] {
            let opts = FitOptions {
                orthonormalization: orth,
                ..FitOptions::default()
            };
            let ls = fit_sieve_ls_with(&sample, &spec, &opts).unwrap();
            let iv = fit_sieve_npiv_with(&sample, &spec, &spec, &opts).unwrap();
            for (a, b) in ls.coef.iter().zip(&iv.coef) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    assert!(worst <= 1e-10, "max coefficient gap {worst:e}");
}

#[test]
fn noiseless_npiv_reproduces_truth_in_span() {
    let dgp = mild_dgp();
    let sample = sample_iid(&dgp, 2000, 3).unwrap();
    let coef = [0.3, -1.0, 0.5, 0.25];
    let h = cos_fn(&coef);
    let y: Vec<f64> = (0..sample.n()).map(|i| h(sample.y2().row(i))).collect();
    let noiseless = sample.with_y1(y).unwrap();
    let psi = SieveSpec::cosine(4).unwrap();
    let b = SieveSpec::bspline(4, 4).unwrap();
    let fit = fit_sieve_npiv(&noiseless, &psi, &b).unwrap();
    assert!(fit.diag.sigma_hat_jk > 0.0);
    let pred = fit.predict(noiseless.y2()).unwrap();
    for (p, y) in pred.iter().zip(noiseless.y1()) {
        assert!((p - y).abs() < 1e-8);
    }
    let proj = empirical_projection(&noiseless, &psi, &b, noiseless.y1()).unwrap();
    for (a, b) in proj.raw_coef().iter().zip(&coef) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn noiseless_ls_reproduces_spline_in_span() {
    let dgp = regression_dgp(1);
    let sample = sample_iid(&dgp, 300, 8).unwrap();
    let spec = SieveSpec::bspline(3, 4).unwrap();
    let basis = Basis::new(&spec).unwrap();
    let c: Vec<f64> = (0..spec.dim()).map(|i| (i as f64 * 0.7).sin()).collect();
    let g = |p: &[f64]| -> f64 { basis.eval(p).unwrap().iter().zip(&c).map(|(a, b)| a * b).sum() };
    let y = (0..300).map(|i| g(sample.x().row(i))).collect();
    let s = sample.with_y1(y).unwrap();
    let fit = fit_sieve_ls(&s, &spec).unwrap();
    let pred = fit.predict(s.x()).unwrap();
    for (p, y) in pred.iter().zip(s.y1()) {
        assert!((p - y).abs() < 1e-10);
    }
}

#[test]
fn matches_raw_closed_form() {
    let dgp = mild_dgp();
    let sample = sample_iid(&dgp, 500, 17).unwrap();
    let psi = SieveSpec::bspline(3, 2).unwrap();
    let b = SieveSpec::bspline(4, 4).unwrap();
    let fit = fit_sieve_npiv(&sample, &psi, &b).unwrap();

    let pr = Basis::new(&psi).unwrap();
    let br = Basis::new(&b).unwrap();
    let p_mat = pr.design(sample.y2()).unwrap();
    let b_mat = br.design(sample.x()).unwrap();
    // ψ(y)'[Ψ'B(B'B)⁻B'Ψ]⁻ Ψ'B(B'B)⁻B'Y
    let btb_inv = pinv(&b_mat.t_matmul(&b_mat), 1e-13).unwrap();
    let pb = p_mat.t_matmul(&b_mat);
    let middle = pb.matmul(&btb_inv);
    let denom = middle.matmul(&pb.transpose());
    let rhs = middle.matvec(&b_mat.t_matvec(sample.y1()));
    let coef = pinv(&denom, 1e-13).unwrap().matvec(&rhs);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let y: f64 = rng.random();
        let direct: f64 = pr.eval(&[y]).unwrap().iter().zip(&coef).map(|(a, b)| a * b).sum();
        let got = fit.predict_point(&[y]).unwrap();
        assert!((got - direct).abs() < 1e-8 * (1.0 + direct.abs()), "{got} vs {direct}");
    }
}

#[test]
fn predictions_invariant_to_basis_scaling() {
    let dgp = mild_dgp();
    let sample = sample_iid(&dgp, 600, 23).unwrap();
    let psi_raw = Basis::new(&SieveSpec::bspline(3, 3).unwrap()).unwrap().design(sample.y2()).unwrap();
    let b_raw = Basis::new(&SieveSpec::bspline(4, 5).unwrap()).unwrap().design(sample.x()).unwrap();
    let fitted = |scale_psi: &[f64], scale_b: &[f64]| -> Vec<f64> {
        let ps = Mat::from_fn(psi_raw.rows(), psi_raw.cols(), |i, j| psi_raw[(i, j)] * scale_psi[j]);
        let bs = Mat::from_fn(b_raw.rows(), b_raw.cols(), |i, j| b_raw[(i, j)] * scale_b[j]);
        let n = ps.rows() as f64;
        let pt = ps.matmul(&inv_sqrt_psd(&ps.t_matmul(&ps).scale(1.0 / n)).unwrap());
        let bt = bs.matmul(&inv_sqrt_psd(&bs.t_matmul(&bs).scale(1.0 / n)).unwrap());
        let sys = NpivSystem::npiv(&pt, &bt, &FitOptions::default()).unwrap();
        pt.matvec(&sys.solve(sample.y1()).unwrap())
    };
    let base = fitted(&[1.0; 6], &[1.0; 9]);
    let scaled = fitted(
        &[3.0, 0.01, 7.5, 0.2, 1e3, 0.5],
        &[0.3, 2.0, 1e-2, 5.0, 1.0, 40.0, 0.7, 0.05, 9.0],
    );
    for (a, b) in base.iter().zip(&scaled) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn sigma_hat_matches_independent_eigen_route() {
    let dgp = mild_dgp();
    let sample = sample_iid(&dgp, 800, 4).unwrap();
    let psi = SieveSpec::bspline(3, 2).unwrap();
    let b = SieveSpec::bspline(4, 5).unwrap();
    let fit = fit_sieve_npiv(&sample, &psi, &b).unwrap();
    let (_, pt) = orthonormal_design(&psi, sample.y2(), Orthonormalization::Empirical).unwrap();
    let (_, bt) = orthonormal_design(&b, sample.x(), Orthonormalization::Empirical).unwrap();
    let s = pt.t_matmul(&bt).scale(1.0 / sample.n() as f64);
    let mut sst = s.matmul(&s.transpose());
    sst.symmetrize();
    let sigma = sym_eigen(&sst).unwrap().values[0].sqrt();
    assert!((fit.diag.sigma_hat_jk - sigma).abs() < 1e-10);
    assert!(fit.diag.sigma_hat_jk <= fit.diag.sigma_hat_max);
    assert!(fit.diag.denom_min_eig > 0.0);
    assert!(fit.diag.ident_stat_b < 1e-10 && fit.diag.ident_stat_psi < 1e-10);
}

#[test]
fn projection_difference_is_fit_of_residuals() {
    let dgp = mild_dgp();
    let sample = sample_iid(&dgp, 700, 31).unwrap();
    let psi = SieveSpec::cosine(4).unwrap();
    let b = SieveSpec::cosine(6).unwrap();
    let h0 = dgp.oracle_h(sample.y2()).unwrap();
    let solver = NpivSolver::npiv(&sample, &psi, &b, &FitOptions::default()).unwrap();
    let fit = solver.fit(sample.y1()).unwrap();
    let proj = solver.fit(&h0).unwrap();
    let resid: Vec<f64> = sample.y1().iter().zip(&h0).map(|(y, h)| y - h).collect();
    let rfit = solver.fit(&resid).unwrap();
    for i in 0..fit.coef.len() {
        assert!((fit.coef[i] - proj.coef[i] - rfit.coef[i]).abs() < 1e-12);
    }
    let standalone = empirical_projection(&sample, &psi, &b, &h0).unwrap();
    assert_eq!(standalone.coef, proj.coef);
}

#[test]
fn predict_linear_in_coef_and_matches_direct_formula() {
    let dgp = regression_dgp(1);
    let sample = sample_iid(&dgp, 400, 2).unwrap();
    let fit = fit_sieve_ls(&sample, &SieveSpec::bspline(4, 3).unwrap()).unwrap();
    let mut scaled = fit.clone();
    scaled.coef.iter_mut().for_each(|c| *c *= -2.5);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let pts = Mat::from_fn(100, 1, |_, _| rng.random());
    let a = fit.predict(&pts).unwrap();
    let b = scaled.predict(&pts).unwrap();
    for i in 0..100 {
        assert!((b[i] + 2.5 * a[i]).abs() < 1e-12 * (1.0 + a[i].abs()));
        let direct: f64 = fit
            .psi_handle
            .eval(pts.row(i))
            .unwrap()
            .iter()
            .zip(&fit.coef)
            .map(|(u, v)| u * v)
            .sum();
        assert!((a[i] - direct).abs() < 1e-12);
    }
    assert!(fit.predict(&Mat::from_rows(&[vec![1.2]])).is_err());
    assert!(fit.predict(&Mat::zeros(2, 2)).is_err());
}

#[test]
fn distances() {
    let dgp = regression_dgp(1);
    let sample = sample_iid(&dgp, 300, 6).unwrap();
    let fit = fit_sieve_ls(&sample, &SieveSpec::bspline(4, 2).unwrap()).unwrap();
    let rule = gauss_legendre(8, 32).unwrap();
    let selfp = |p: &[f64]| fit.predict_point(p).unwrap();
    assert!(sup_norm_distance(&fit, selfp, 101).unwrap() < 1e-12);
    assert!(l2_distance(&fit, selfp, &rule).unwrap() < 1e-12);

    let c = sample.y1().iter().sum::<f64>() / 300.0;
    let cfit = fit_sieve_ls(&sample, &"constant".parse().unwrap()).unwrap();
    assert!((sup_norm_distance(&cfit, |_| 0.25, 11).unwrap() - (c - 0.25).abs()).abs() < 1e-12);
    assert!((l2_distance(&cfit, |_| 0.25, &rule).unwrap() - (c - 0.25).abs()).abs() < 1e-12);
    assert!(sup_norm_distance(&cfit, |_| 0.0, 1).is_err());

    let h0 = |p: &[f64]| dgp.h0_point(p);
    let coarse = sup_norm_distance(&fit, h0, 500).unwrap();
    let fine = sup_norm_distance(&fit, h0, 1000).unwrap();
    assert!((coarse - fine).abs() / fine < 0.01);
}

#[test]
fn two_dimensional_ls_fit() {
    let dgp = regression_dgp(2);
    let sample = sample_iid(&dgp, 2000, 1).unwrap();
    let spec: SieveSpec = "bspline:order=3,knots=2*bspline:order=3,knots=2".parse().unwrap();
    let fit = fit_sieve_ls(&sample, &spec).unwrap();
    assert_eq!(fit.coef.len(), 25);
    let err = sup_norm_distance(&fit, |p| dgp.h0_point(p), 41).unwrap();
    assert!(err < 1.0, "sup error {err}");
}

#[test]
fn fit_report_round_trips_through_json() {
    let dgp = mild_dgp();
    let sample = sample_iid(&dgp, 500, 9).unwrap();
    let fit = fit_sieve_npiv(&sample, &SieveSpec::cosine(3).unwrap(), &SieveSpec::cosine(5).unwrap())
        .unwrap();
    let report = fit.report();
    let text = serde_json::to_string(&report).unwrap();
    let back: npiv_core::estimators::FitReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, report);
    assert!(text.contains("\"psi_spec\":\"cosine:terms=3\""));
}

fn sample_strategy() -> impl Strategy<Value = (u64, usize)> {
    (0u64..1000, 80usize..300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn estimator_is_linear_in_y((seed, n) in sample_strategy(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let dgp = mild_dgp();
        let s = sample_iid(&dgp, n, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let y2: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let psi = SieveSpec::bspline(2, 1).unwrap();
        let bs = SieveSpec::bspline(3, 2).unwrap();
        let solver = match NpivSolver::npiv(&s, &psi, &bs, &FitOptions::default()) {
            Ok(sv) => sv,
            Err(_) => return Ok(()),
        };
        let f1 = solver.fit(s.y1()).unwrap();
        let f2 = solver.fit(&y2).unwrap();
        let comb: Vec<f64> = s.y1().iter().zip(&y2).map(|(u, v)| a * u + b * v).collect();
        let fc = solver.fit(&comb).unwrap();
        for i in 0..fc.coef.len() {
            let want = a * f1.coef[i] + b * f2.coef[i];
            prop_assert!((fc.coef[i] - want).abs() <= 1e-10 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn csv_roundtrip(seed in 0u64..1000, n in 1usize..50) {
        let s = sample_iid(&mild_dgp(), n, seed).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        prop_assert_eq!(Sample::read_csv(&buf[..]).unwrap(), s);
    }
}
