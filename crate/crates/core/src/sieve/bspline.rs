use crate::error::{NpivError, Result};

/// Extended knot sequence with boundary multiplicity equal to the spline order.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    order: usize,
    knots: Vec<f64>,
}

/// Uniform knots `j/(N+1)` with the boundary knots 0 and 1 repeated `m` times.
pub fn make_knots(order: usize, n_interior: usize) -> Result<KnotVector> {
    if order == 0 {
        return Err(NpivError::Domain("spline order must be at least 1".into()));
    }
    let mut knots = Vec::with_capacity(n_interior + 2 * order);
    knots.extend(std::iter::repeat_n(0.0, order));
    let denom = (n_interior + 1) as f64;
    knots.extend((1..=n_interior).map(|j| j as f64 / denom));
    knots.extend(std::iter::repeat_n(1.0, order));
    Ok(KnotVector { order, knots })
}

impl KnotVector {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_interior(&self) -> usize {
        self.knots.len() - 2 * self.order
    }

    /// Number of basis functions, `N + m`.
    pub fn dim(&self) -> usize {
        self.knots.len() - self.order
    }

    /// Full extended sequence, starting with the `m` copies of 0.
    pub fn as_slice(&self) -> &[f64] {
        &self.knots
    }

    /// Distinct breakpoints `0 = t_0 < … < t_{N+1} = 1`.
    pub fn breakpoints(&self) -> &[f64] {
        &self.knots[self.order - 1..=self.order + self.n_interior()]
    }

    /// Ratio of the largest to the smallest knot spacing.
    pub fn mesh_ratio(&self) -> f64 {
        let gaps: Vec<f64> = self.breakpoints().windows(2).map(|w| w[1] - w[0]).collect();
        let max = gaps.iter().copied().fold(0.0, f64::max);
        let min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
        max / min
    }

    /// Index `s` of the knot interval `[t_s, t_{s+1})` holding `x`; `x = 1` maps to the last interval.
    fn span(&self, x: f64) -> usize {
        let m = self.order;
        let last = m - 1 + self.n_interior();
        // interior knots are uniform, but search so the routine works for any sequence
        let bp = self.breakpoints();
        let idx = bp.partition_point(|&t| t <= x);
        (m - 1 + idx.saturating_sub(1)).min(last)
    }

    /// Nonzero values `B_{s-m+1}, …, B_s` at `x` and the index of the first one.
    pub fn eval_local(&self, x: f64, out: &mut [f64]) -> Result<usize> {
        let m = self.order;
        if !(0.0..=1.0).contains(&x) {
            return Err(NpivError::Domain(format!("spline argument {x} outside [0, 1]")));
        }
        debug_assert!(out.len() >= m);
        let t = &self.knots;
        let s = self.span(x);
        let mut left = [0.0; 32];
        let mut right = [0.0; 32];
        assert!(m <= left.len(), "spline order above 32");
        out[0] = 1.0;
        for j in 1..m {
            left[j] = x - t[s + 1 - j];
            right[j] = t[s + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = out[r] / (right[r + 1] + left[j - r]);
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
        Ok(s + 1 - m)
    }

    /// All `N + m` basis values at `x`, written into `out`.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) -> Result<()> {
        let m = self.order;
        let mut local = [0.0; 32];
        let first = self.eval_local(x, &mut local[..m])?;
        out.iter_mut().for_each(|v| *v = 0.0);
        out[first..first + m].copy_from_slice(&local[..m]);
        Ok(())
    }
}

/// All `N + m` B-spline values at `x`.
pub fn bspline_eval(knots: &KnotVector, x: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; knots.dim()];
    knots.eval_into(x, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn knot_examples() {
        assert_eq!(make_knots(2, 1).unwrap().as_slice(), &[0.0, 0.0, 0.5, 1.0, 1.0]);
        assert_eq!(make_knots(1, 0).unwrap().as_slice(), &[0.0, 1.0]);
        for (m, n) in [(1, 0), (2, 3), (4, 7), (6, 20)] {
            let k = make_knots(m, n).unwrap();
            assert!((k.mesh_ratio() - 1.0).abs() < 1e-12);
            assert_eq!(k.dim(), n + m);
        }
        assert!(make_knots(0, 2).is_err());
    }

    #[test]
    fn linear_hats() {
        let k = make_knots(2, 0).unwrap();
        assert_eq!(bspline_eval(&k, 0.25).unwrap(), vec![0.75, 0.25]);
        assert_eq!(bspline_eval(&k, 1.0).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn indicators_are_right_continuous() {
        let k = make_knots(1, 1).unwrap();
        assert_eq!(bspline_eval(&k, 0.5).unwrap(), vec![0.0, 1.0]);
        assert_eq!(bspline_eval(&k, 0.49).unwrap(), vec![1.0, 0.0]);
        assert_eq!(bspline_eval(&k, 1.0).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn outside_domain() {
        let k = make_knots(3, 2).unwrap();
        assert!(bspline_eval(&k, -0.1).is_err());
        assert!(bspline_eval(&k, 1.0 + 1e-12).is_err());
        assert!(bspline_eval(&k, f64::NAN).is_err());
    }

    #[test]
    fn cubic_partition_and_support() {
        let k = make_knots(4, 5).unwrap();
        for i in 0..=200 {
            let x = i as f64 / 200.0;
            let v = bspline_eval(&k, x).unwrap();
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(v.iter().all(|&b| b >= 0.0));
            assert!(v.iter().filter(|&&b| b != 0.0).count() <= 4);
        }
    }
}
