//! Deterministic dense decompositions: one-sided Jacobi SVD and cyclic
//! Jacobi symmetric eigensolver. No randomized steps, so identical input
//! bits give identical output bits.

use super::mat::Mat;
use crate::error::{NpivError, Result};

const MAX_SWEEPS: usize = 100;

/// Default relative cutoff for [`pinv`].
pub const DEFAULT_PINV_REL_TOL: f64 = 1e-12;

/// Thin SVD `a = u · diag(singular_values) · vt`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// m × r, orthonormal columns (r = min(m, n)).
    pub u: Mat,
    /// Non-increasing, non-negative.
    pub singular_values: Vec<f64>,
    /// r × n, orthonormal rows.
    pub vt: Mat,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Mat {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (j, s) in self.singular_values.iter().enumerate() {
                us[(i, j)] *= s;
            }
        }
        us.matmul(&self.vt)
    }

    pub fn max_singular_value(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn min_singular_value(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Column `j` is the unit eigenvector for `values[j]`.
    pub vectors: Mat,
}

pub fn svd(a: &Mat) -> Result<SvdResult> {
    if !a.is_finite() {
        return Err(NpivError::Domain("svd input has non-finite entries".into()));
    }
    if a.rows() >= a.cols() {
        svd_tall(a)
    } else {
        let t = svd_tall(&a.transpose())?;
        Ok(SvdResult {
            u: t.vt.transpose(),
            singular_values: t.singular_values,
            vt: t.u.transpose(),
        })
    }
}

// Hestenes one-sided Jacobi on the columns of a tall matrix.
fn svd_tall(a: &Mat) -> Result<SvdResult> {
    let (m, n) = a.shape();
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.col(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    let mut converged = n < 2;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = {
                    let (cp, cq) = (&cols[p], &cols[q]);
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for i in 0..m {
                        alpha += cp[i] * cp[i];
                        beta += cq[i] * cq[i];
                        gamma += cp[i] * cq[i];
                    }
                    (alpha, beta, gamma)
                };
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut cols, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(NpivError::Numeric(format!(
            "Jacobi SVD did not converge within {MAX_SWEEPS} sweeps"
        )));
    }

    let norms: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps ties in column order, so output is deterministic
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let scale = norms.iter().cloned().fold(0.0, f64::max);
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut singular_values = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        let s = norms[j];
        singular_values.push(s);
        if s > 0.0 && s > scale * 1e-200 {
            u_cols.push(cols[j].iter().map(|x| x / s).collect());
        } else {
            u_cols.push(vec![0.0; m]);
            missing.push(slot);
        }
    }
    complete_orthonormal(&mut u_cols, &missing, m);

    let u = Mat::from_fn(m, n, |i, j| u_cols[j][i]);
    let vt = Mat::from_fn(n, n, |i, j| v[order[i]][j]);
    Ok(SvdResult {
        u,
        singular_values,
        vt,
    })
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let a = *x;
        let b = *y;
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

// Fills the listed (zero) columns with unit vectors orthogonal to the rest.
fn complete_orthonormal(cols: &mut [Vec<f64>], missing: &[usize], m: usize) {
    let mut candidate = 0;
    for &slot in missing {
        while candidate < m {
            let mut e = vec![0.0; m];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for (k, c) in cols.iter().enumerate() {
                    if k == slot || c.iter().all(|x| *x == 0.0) {
                        continue;
                    }
                    let dot: f64 = c.iter().zip(&e).map(|(a, b)| a * b).sum();
                    for (ei, ci) in e.iter_mut().zip(c) {
                        *ei -= dot * ci;
                    }
                }
            }
            let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                cols[slot] = e.iter().map(|x| x / norm).collect();
                break;
            }
        }
    }
}

fn check_symmetric(a: &Mat, what: &str) -> Result<()> {
    if !a.is_square() {
        return Err(NpivError::Domain(format!(
            "{what}: matrix is {}x{}, not square",
            a.rows(),
            a.cols()
        )));
    }
    if !a.is_finite() {
        return Err(NpivError::Domain(format!("{what}: non-finite entries")));
    }
    let asym = a.asymmetry();
    if asym > 1e-10 * a.max_abs().max(1.0) {
        return Err(NpivError::Domain(format!(
            "{what}: matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    Ok(())
}

/// Cyclic Jacobi eigensolver for symmetric matrices.
pub fn sym_eigen(a: &Mat) -> Result<SymEigen> {
    check_symmetric(a, "sym_eigen")?;
    let n = a.rows();
    let mut w = a.clone();
    w.symmetrize();
    let mut v = Mat::identity(n);

    let floor = 1e-18 * w.frobenius_norm();
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = w[(p, q)];
                if apq.abs() <= floor
                    || apq.abs() <= f64::EPSILON * (w[(p, p)] * w[(q, q)]).abs().sqrt()
                {
                    continue;
                }
                rotated = true;
                let app = w[(p, p)];
                let aqq = w[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let wkp = w[(k, p)];
                    let wkq = w[(k, q)];
                    w[(k, p)] = c * wkp - s * wkq;
                    w[(k, q)] = s * wkp + c * wkq;
                }
                for k in 0..n {
                    let wpk = w[(p, k)];
                    let wqk = w[(q, k)];
                    w[(p, k)] = c * wpk - s * wqk;
                    w[(q, k)] = s * wpk + c * wqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(NpivError::Numeric(format!(
            "Jacobi eigensolver did not converge within {MAX_SWEEPS} sweeps"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[(i, i)].total_cmp(&w[(j, j)]));
    let values = order.iter().map(|&i| w[(i, i)]).collect();
    let vectors = Mat::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(SymEigen { values, vectors })
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eig_sym(a: &Mat) -> Result<f64> {
    Ok(sym_eigen(a)?.values.first().copied().unwrap_or(0.0))
}

pub fn spectral_norm(a: &Mat) -> Result<f64> {
    if a.rows() == 0 || a.cols() == 0 {
        return Ok(0.0);
    }
    Ok(svd(a)?.max_singular_value())
}

/// Moore–Penrose inverse with relative singular-value cutoff.
pub fn pinv(a: &Mat, rel_tol: f64) -> Result<Mat> {
    Ok(pinv_with_rank(a, rel_tol)?.0)
}

/// Like [`pinv`] but also reports how many singular values were discarded.
pub fn pinv_with_rank(a: &Mat, rel_tol: f64) -> Result<(Mat, usize)> {
    if !(0.0..1.0).contains(&rel_tol) {
        return Err(NpivError::Domain(format!(
            "pinv rel_tol {rel_tol} outside [0, 1)"
        )));
    }
    let dec = svd(a)?;
    let cutoff = rel_tol * dec.max_singular_value();
    let r = dec.singular_values.len();
    let mut out = Mat::zeros(a.cols(), a.rows());
    let mut dropped = 0;
    for k in 0..r {
        let s = dec.singular_values[k];
        if s <= cutoff || s == 0.0 {
            dropped += 1;
            continue;
        }
        let inv = 1.0 / s;
        for i in 0..a.cols() {
            let vik = dec.vt[(k, i)] * inv;
            if vik == 0.0 {
                continue;
            }
            for j in 0..a.rows() {
                out[(i, j)] += vik * dec.u[(j, k)];
            }
        }
    }
    Ok((out, dropped))
}

/// Symmetric inverse square root of a positive-definite matrix.
pub fn inv_sqrt_psd(a: &Mat) -> Result<Mat> {
    let eig = sym_eigen(a)?;
    let n = a.rows();
    let lmax = eig.values.last().copied().unwrap_or(0.0);
    let tol = 1e-13 * lmax.abs().max(f64::MIN_POSITIVE);
    if let Some((idx, &bad)) = eig.values.iter().enumerate().find(|(_, &l)| l <= tol) {
        return Err(NpivError::Domain(format!(
            "matrix is not positive definite: eigenvalue #{idx} = {bad:e}"
        )));
    }
    let scales: Vec<f64> = eig.values.iter().map(|l| 1.0 / l.sqrt()).collect();
    let mut r = Mat::zeros(n, n);
    for k in 0..n {
        let s = scales[k];
        for i in 0..n {
            let vik = eig.vectors[(i, k)] * s;
            for j in 0..n {
                r[(i, j)] += vik * eig.vectors[(j, k)];
            }
        }
    }
    r.symmetrize();
    Ok(r)
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if !a.is_square() || b.len() != n {
        return Err(NpivError::Domain("solve: dimension mismatch".into()));
    }
    let mut m = a.clone();
    let mut x = b.to_vec();
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| m[(i, k)].abs().total_cmp(&m[(j, k)].abs()))
            .unwrap_or(k);
        if m[(piv, k)] == 0.0 {
            return Err(NpivError::Numeric("solve: singular matrix".into()));
        }
        if piv != k {
            for j in 0..n {
                let tmp = m[(k, j)];
                m[(k, j)] = m[(piv, j)];
                m[(piv, j)] = tmp;
            }
            x.swap(k, piv);
        }
        for i in (k + 1)..n {
            let f = m[(i, k)] / m[(k, k)];
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                m[(i, j)] -= f * m[(k, j)];
            }
            x[i] -= f * x[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for j in (k + 1)..n {
            s -= m[(k, j)] * x[j];
        }
        x[k] = s / m[(k, k)];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_matrix(rows: usize, cols: usize, seed: u64) -> Mat {
        let mut state = seed;
        Mat::from_fn(rows, cols, |_, _| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn svd_identity_and_diagonal() {
        let s = svd(&Mat::identity(2)).unwrap();
        assert_eq!(s.singular_values, vec![1.0, 1.0]);
        let s = svd(&Mat::from_diag(&[3.0, 0.0])).unwrap();
        assert_eq!(s.singular_values, vec![3.0, 0.0]);
        // u must still have orthonormal columns with a zero singular value
        let utu = s.u.t_matmul(&s.u);
        assert!(utu.sub(&Mat::identity(2)).max_abs() < 1e-14);
    }

    #[test]
    fn svd_reconstructs_random_matrix() {
        for (r, c) in [(5, 3), (3, 5), (6, 6)] {
            let a = lcg_matrix(r, c, 7 + r as u64);
            let s = svd(&a).unwrap();
            let err = s.reconstruct().sub(&a).frobenius_norm() / a.frobenius_norm();
            assert!(err < 1e-10, "{r}x{c}: {err}");
            assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
            let vvt = s.vt.matmul(&s.vt.transpose());
            assert!(vvt.sub(&Mat::identity(vvt.rows())).max_abs() < 1e-12);
        }
    }

    #[test]
    fn svd_rejects_non_finite() {
        let a = Mat::from_rows(&[vec![f64::NAN, 0.0]]);
        assert!(matches!(svd(&a), Err(NpivError::Domain(_))));
    }

    #[test]
    fn pinv_small_cases() {
        assert!(pinv(&Mat::identity(3), DEFAULT_PINV_REL_TOL)
            .unwrap()
            .sub(&Mat::identity(3))
            .max_abs()
            < 1e-15);
        let p = Mat::from_diag(&[1.0, 0.0]);
        assert_eq!(pinv(&p, DEFAULT_PINV_REL_TOL).unwrap(), p);
        assert!(pinv(&p, 1.0).is_err());
        assert!(pinv(&p, -0.1).is_err());
    }

    #[test]
    fn pinv_matches_linear_solve_for_full_rank() {
        let a = lcg_matrix(4, 4, 99).add(&Mat::identity(4).scale(2.0));
        let p = pinv(&a, DEFAULT_PINV_REL_TOL).unwrap();
        for j in 0..4 {
            let mut e = vec![0.0; 4];
            e[j] = 1.0;
            let col = solve(&a, &e).unwrap();
            for i in 0..4 {
                assert!((p[(i, j)] - col[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn inv_sqrt_diag_and_error() {
        let r = inv_sqrt_psd(&Mat::from_diag(&[4.0, 9.0])).unwrap();
        assert!((r[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((r[(1, 1)] - 1.0 / 3.0).abs() < 1e-15);
        assert!(r[(0, 1)].abs() < 1e-15);
        let err = inv_sqrt_psd(&Mat::from_diag(&[1.0, -1.0])).unwrap_err();
        assert!(err.to_string().contains("eigenvalue #0"), "{err}");
    }

    #[test]
    fn min_eig_and_spectral_norm_small_cases() {
        assert_eq!(min_eig_sym(&Mat::from_diag(&[1.0, 3.0])).unwrap(), 1.0);
        assert_eq!(spectral_norm(&Mat::identity(4)).unwrap(), 1.0);
        assert!((spectral_norm(&Mat::from_diag(&[2.0, -5.0])).unwrap() - 5.0).abs() < 1e-15);
        let asym = Mat::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]);
        assert!(matches!(min_eig_sym(&asym), Err(NpivError::Domain(_))));
    }
}
