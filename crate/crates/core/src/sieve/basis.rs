use crate::error::{NpivError, Result};
use crate::numerics::{gauss_legendre, gauss_legendre_on_breaks, inv_sqrt_psd, min_eig_sym, Mat, QuadratureRule};

use super::bspline::{make_knots, KnotVector};
use super::spec::{AxisSpec, SieveSpec};
use super::wavelet::WaveletBasis;

/// Subintervals of the composite rule used for wavelet and cosine Grams.
pub const WAVELET_QUAD_SUBINTERVALS: usize = 1 << 14;

/// Gram matrices with smallest eigenvalue below this are flagged rank-deficient.
pub const RANK_WARNING_EIG: f64 = 1e-12;

#[derive(Debug, Clone)]
enum Univariate {
    BSpline(KnotVector),
    Wavelet(WaveletBasis),
    Cosine(usize),
}

impl Univariate {
    fn new(axis: &AxisSpec) -> Result<Self> {
        axis.validate()?;
        Ok(match *axis {
            AxisSpec::BSpline {
                order,
                interior_knots,
            } => Univariate::BSpline(make_knots(order, interior_knots)?),
            AxisSpec::Wavelet {
                vanishing_moments,
                coarse_level,
                fine_level,
            } => Univariate::Wavelet(WaveletBasis::new(vanishing_moments, coarse_level, fine_level)?),
            AxisSpec::Cosine { terms } => Univariate::Cosine(terms),
        })
    }

    fn dim(&self) -> usize {
        match self {
            Univariate::BSpline(k) => k.dim(),
            Univariate::Wavelet(w) => w.dim(),
            Univariate::Cosine(t) => *t,
        }
    }

    fn eval_into(&self, x: f64, out: &mut [f64]) -> Result<()> {
        match self {
            Univariate::BSpline(k) => k.eval_into(x, out),
            Univariate::Wavelet(w) => w.eval_into(x, out),
            Univariate::Cosine(_) => cosine_eval_into(x, out),
        }
    }

    /// Rule exact for products of two basis functions (splines), or accurate to the
    /// cascade tolerance (wavelets).
    fn quadrature(&self) -> Result<QuadratureRule> {
        match self {
            Univariate::BSpline(k) => gauss_legendre_on_breaks(k.order() + 1, k.breakpoints()),
            Univariate::Wavelet(_) => gauss_legendre(4, WAVELET_QUAD_SUBINTERVALS),
            Univariate::Cosine(t) => gauss_legendre(8, (2 * t).max(16)),
        }
    }
}

/// `1, √2 cos(πx), √2 cos(2πx), …` (orthonormal under the uniform measure).
pub fn cosine_eval_into(x: f64, out: &mut [f64]) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(NpivError::Domain(format!("cosine argument {x} outside [0, 1]")));
    }
    let r2 = std::f64::consts::SQRT_2;
    for (k, v) in out.iter_mut().enumerate() {
        *v = if k == 0 {
            1.0
        } else {
            r2 * (k as f64 * std::f64::consts::PI * x).cos()
        };
    }
    Ok(())
}

/// Raw (not orthonormalized) evaluator for a sieve space.
#[derive(Debug, Clone)]
pub struct Basis {
    spec: SieveSpec,
    axes: Vec<Univariate>,
}

impl Basis {
    pub fn new(spec: &SieveSpec) -> Result<Self> {
        let axes = spec
            .axes()
            .iter()
            .map(Univariate::new)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spec: spec.clone(),
            axes,
        })
    }

    pub fn spec(&self) -> &SieveSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.axes.iter().map(Univariate::dim).product()
    }

    pub fn domain_dim(&self) -> usize {
        self.axes.len()
    }

    /// Tensor-product evaluation at `point` (Kronecker order, axis 1 slowest).
    pub fn eval_into(&self, point: &[f64], out: &mut [f64]) -> Result<()> {
        if point.len() != self.axes.len() {
            return Err(NpivError::Domain(format!(
                "point has dimension {}, basis has {}",
                point.len(),
                self.axes.len()
            )));
        }
        if out.len() != self.dim() {
            return Err(NpivError::Domain("output buffer has wrong length".into()));
        }
        if self.axes.len() == 1 {
            return self.axes[0].eval_into(point[0], out);
        }
        let mut acc = vec![1.0];
        for (axis, &x) in self.axes.iter().zip(point) {
            let mut vals = vec![0.0; axis.dim()];
            axis.eval_into(x, &mut vals)?;
            acc = acc
                .iter()
                .flat_map(|&a| vals.iter().map(move |&v| a * v))
                .collect();
        }
        out.copy_from_slice(&acc);
        Ok(())
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(point, &mut out)?;
        Ok(out)
    }

    /// Design matrix with one row per row of `points` (n × d).
    pub fn design(&self, points: &Mat) -> Result<Mat> {
        let k = self.dim();
        let mut out = Mat::zeros(points.rows(), k);
        for i in 0..points.rows() {
            self.eval_into(points.row(i), out.row_mut(i))?;
        }
        Ok(out)
    }

    /// Tensor quadrature rule: nodes (n × d) and weights.
    fn tensor_rule(&self) -> Result<(Mat, Vec<f64>)> {
        let rules = self
            .axes
            .iter()
            .map(Univariate::quadrature)
            .collect::<Result<Vec<_>>>()?;
        Ok(tensor_grid(&rules))
    }
}

fn tensor_grid(rules: &[QuadratureRule]) -> (Mat, Vec<f64>) {
    let d = rules.len();
    let total: usize = rules.iter().map(QuadratureRule::len).product();
    let mut nodes = Mat::zeros(total, d);
    let mut weights = vec![1.0; total];
    for p in 0..total {
        let mut rem = p;
        for a in (0..d).rev() {
            let len = rules[a].len();
            let i = rem % len;
            rem /= len;
            nodes[(p, a)] = rules[a].nodes[i];
            weights[p] *= rules[a].weights[i];
        }
    }
    (nodes, weights)
}

/// Tensor-product evaluation of a sieve at a point.
pub fn tensor_eval(spec: &SieveSpec, point: &[f64]) -> Result<Vec<f64>> {
    Basis::new(spec)?.eval(point)
}

/// Density on [0, 1]^d tabulated on an equispaced grid (endpoints included),
/// interpolated multilinearly. Values are stored with axis 1 slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    dim: usize,
    resolution: usize,
    values: Vec<f64>,
}

impl DensityGrid {
    pub fn new(dim: usize, resolution: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || resolution < 2 {
            return Err(NpivError::Domain("density grid needs d ≥ 1 and resolution ≥ 2".into()));
        }
        if values.len() != resolution.pow(dim as u32) {
            return Err(NpivError::Domain("density grid has wrong number of values".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(NpivError::Domain("density values must be finite and non-negative".into()));
        }
        Ok(Self {
            dim,
            resolution,
            values,
        })
    }

    pub fn from_fn(dim: usize, resolution: usize, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let total = resolution.pow(dim as u32);
        let step = 1.0 / (resolution.max(2) - 1) as f64;
        let mut pt = vec![0.0; dim];
        let values = (0..total)
            .map(|p| {
                let mut rem = p;
                for a in (0..dim).rev() {
                    pt[a] = (rem % resolution) as f64 * step;
                    rem /= resolution;
                }
                f(&pt)
            })
            .collect();
        Self::new(dim, resolution, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, point: &[f64]) -> f64 {
        let r = self.resolution;
        let mut base = [0usize; 8];
        let mut frac = [0.0f64; 8];
        assert!(self.dim <= 8, "density grids support at most 8 dimensions");
        for a in 0..self.dim {
            let pos = point[a].clamp(0.0, 1.0) * (r - 1) as f64;
            let i = (pos.floor() as usize).min(r - 2);
            base[a] = i;
            frac[a] = pos - i as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << self.dim) {
            let mut w = 1.0;
            let mut idx = 0;
            for a in 0..self.dim {
                let up = (corner >> (self.dim - 1 - a)) & 1;
                w *= if up == 1 { frac[a] } else { 1.0 - frac[a] };
                idx = idx * r + base[a] + up;
            }
            if w != 0.0 {
                acc += w * self.values[idx];
            }
        }
        acc
    }
}

/// Measure under which a Gram matrix is computed.
#[derive(Debug, Clone)]
pub enum Measure<'a> {
    Uniform,
    DensityGrid(&'a DensityGrid),
    /// Sample points, one per row.
    EmpiricalSample(&'a Mat),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Uniform,
    EmpiricalSample,
    DensityGrid,
}

impl Measure<'_> {
    pub fn kind(&self) -> MeasureKind {
        match self {
            Measure::Uniform => MeasureKind::Uniform,
            Measure::DensityGrid(_) => MeasureKind::DensityGrid,
            Measure::EmpiricalSample(_) => MeasureKind::EmpiricalSample,
        }
    }
}

/// Gram matrix together with its conditioning metadata.
#[derive(Debug, Clone)]
pub struct Gram {
    pub matrix: Mat,
    pub min_eig: f64,
    pub rank_warning: Option<String>,
}

impl Gram {
    fn from_matrix(mut matrix: Mat) -> Result<Self> {
        matrix.symmetrize();
        let min_eig = min_eig_sym(&matrix)?;
        let rank_warning = (min_eig < RANK_WARNING_EIG)
            .then(|| format!("Gram matrix is nearly singular: min eigenvalue {min_eig:e}"));
        Ok(Self {
            matrix,
            min_eig,
            rank_warning,
        })
    }
}

/// `Σ_i w_i b_i b_i'` for the rows `b_i` of `design`.
pub fn weighted_gram(design: &Mat, weights: &[f64]) -> Mat {
    let (n, k) = design.shape();
    let mut g = Mat::zeros(k, k);
    for i in 0..n {
        let w = weights[i];
        if w == 0.0 {
            continue;
        }
        let row = design.row(i);
        for a in 0..k {
            let ra = w * row[a];
            if ra == 0.0 {
                continue;
            }
            for b in a..k {
                g[(a, b)] += ra * row[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            g[(a, b)] = g[(b, a)];
        }
    }
    g
}

/// `E[b(X) b(X)']` under `measure`.
pub fn gram_matrix(spec: &SieveSpec, measure: &Measure<'_>) -> Result<Gram> {
    let basis = Basis::new(spec)?;
    Gram::from_matrix(raw_gram(&basis, measure)?)
}

fn raw_gram(basis: &Basis, measure: &Measure<'_>) -> Result<Mat> {
    match measure {
        Measure::Uniform => {
            // product measure: Kronecker product of the univariate Grams
            let mut g = Mat::identity(1);
            for axis in &basis.axes {
                let rule = axis.quadrature()?;
                let mut design = Mat::zeros(rule.len(), axis.dim());
                for (i, &x) in rule.nodes.iter().enumerate() {
                    axis.eval_into(x, design.row_mut(i))?;
                }
                g = g.kron(&weighted_gram(&design, &rule.weights));
            }
            Ok(g)
        }
        Measure::DensityGrid(grid) => {
            if grid.dim() != basis.domain_dim() {
                return Err(NpivError::Domain(format!(
                    "density grid has dimension {}, basis has {}",
                    grid.dim(),
                    basis.domain_dim()
                )));
            }
            let (nodes, mut weights) = basis.tensor_rule()?;
            for (i, w) in weights.iter_mut().enumerate() {
                *w *= grid.value(nodes.row(i));
            }
            Ok(weighted_gram(&basis.design(&nodes)?, &weights))
        }
        Measure::EmpiricalSample(points) => {
            let n = points.rows();
            if n == 0 {
                return Err(NpivError::Domain("empirical Gram of an empty sample".into()));
            }
            let design = basis.design(points)?;
            Ok(weighted_gram(&design, &vec![1.0 / n as f64; n]))
        }
    }
}

/// Sieve basis with its Gram matrix and the symmetric map `G^{-1/2}` to orthonormal coordinates.
#[derive(Debug, Clone)]
pub struct BasisHandle {
    basis: Basis,
    gram: Gram,
    transform: Mat,
    measure: MeasureKind,
}

impl BasisHandle {
    /// Builds a handle from a precomputed Gram of `basis`.
    pub fn from_gram(basis: Basis, gram: Mat, measure: MeasureKind) -> Result<Self> {
        if gram.shape() != (basis.dim(), basis.dim()) {
            return Err(NpivError::Domain("Gram shape does not match basis dimension".into()));
        }
        let gram = Gram::from_matrix(gram)?;
        let transform = inv_sqrt_psd(&gram.matrix).map_err(|e| {
            NpivError::Domain(format!("cannot orthonormalize (min eigenvalue {:e}): {e}", gram.min_eig))
        })?;
        Ok(Self {
            basis,
            gram,
            transform,
            measure,
        })
    }

    pub fn spec(&self) -> &SieveSpec {
        self.basis.spec()
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn gram(&self) -> &Mat {
        &self.gram.matrix
    }

    pub fn gram_min_eig(&self) -> f64 {
        self.gram.min_eig
    }

    pub fn rank_warning(&self) -> Option<&str> {
        self.gram.rank_warning.as_deref()
    }

    pub fn transform(&self) -> &Mat {
        &self.transform
    }

    pub fn measure(&self) -> MeasureKind {
        self.measure
    }

    /// Orthonormalized basis vector `G^{-1/2} b(x)`.
    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>> {
        let raw = self.basis.eval(point)?;
        Ok(self.transform.matvec(&raw))
    }

    /// Orthonormalized design matrix `B G^{-1/2}`.
    pub fn design(&self, points: &Mat) -> Result<Mat> {
        Ok(self.basis.design(points)?.matmul(&self.transform))
    }

    /// Gram of the orthonormalized functions under `measure`.
    pub fn orthonormalized_gram(&self, measure: &Measure<'_>) -> Result<Mat> {
        let g = raw_gram(&self.basis, measure)?;
        let mut out = self.transform.matmul(&g).matmul(&self.transform);
        out.symmetrize();
        Ok(out)
    }

    /// Transform obtained by orthonormalizing the already-orthonormalized functions again.
    pub fn reorthonormalize(&self, measure: &Measure<'_>) -> Result<Mat> {
        inv_sqrt_psd(&self.orthonormalized_gram(measure)?)
    }
}

pub fn orthonormalize(spec: &SieveSpec, measure: &Measure<'_>) -> Result<BasisHandle> {
    let basis = Basis::new(spec)?;
    let g = raw_gram(&basis, measure)?;
    BasisHandle::from_gram(basis, g, measure.kind())
}

/// Largest Euclidean norm of the orthonormalized basis vector over an equispaced grid
/// with `grid_size` points per axis.
pub fn zeta0(handle: &BasisHandle, grid_size: usize) -> Result<f64> {
    if grid_size < 2 {
        return Err(NpivError::Domain("zeta0 grid needs at least 2 points per axis".into()));
    }
    let d = handle.basis.domain_dim();
    let step = 1.0 / (grid_size - 1) as f64;
    let total = grid_size.pow(d as u32);
    let mut pt = vec![0.0; d];
    let mut raw = vec![0.0; handle.dim()];
    let mut best = 0.0f64;
    for p in 0..total {
        let mut rem = p;
        for a in (0..d).rev() {
            pt[a] = (rem % grid_size) as f64 * step;
            rem /= grid_size;
        }
        handle.basis.eval_into(&pt, &mut raw)?;
        let v = handle.transform.matvec(&raw);
        best = best.max(v.iter().map(|x| x * x).sum::<f64>().sqrt());
    }
    Ok(best)
}
