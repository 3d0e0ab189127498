use crate::error::{NpivError, Result};

/// Quadrature rule on [0, 1]: `∫ f ≈ Σ weights[i] · f(nodes[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1].
fn legendre_reference(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre rule with `subintervals` equal pieces of [0, 1].
///
/// Exact for polynomials of degree ≤ 2·n_nodes − 1 on each piece; weights sum to 1.
pub fn gauss_legendre(n_nodes: usize, subintervals: usize) -> Result<QuadratureRule> {
    if subintervals == 0 {
        return Err(NpivError::Domain("gauss_legendre: subintervals must be ≥ 1".into()));
    }
    let breaks: Vec<f64> = (0..=subintervals)
        .map(|i| i as f64 / subintervals as f64)
        .collect();
    gauss_legendre_on_breaks(n_nodes, &breaks)
}

/// Composite Gauss–Legendre rule over arbitrary increasing breakpoints covering [0, 1].
pub fn gauss_legendre_on_breaks(n_nodes: usize, breaks: &[f64]) -> Result<QuadratureRule> {
    if n_nodes == 0 {
        return Err(NpivError::Domain("gauss_legendre: n_nodes must be ≥ 1".into()));
    }
    if breaks.len() < 2 || breaks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(NpivError::Domain(
            "gauss_legendre: breakpoints must be strictly increasing".into(),
        ));
    }
    let (ref_nodes, ref_weights) = legendre_reference(n_nodes);
    let mut nodes = Vec::with_capacity(n_nodes * (breaks.len() - 1));
    let mut weights = Vec::with_capacity(nodes.capacity());
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, wt) in ref_nodes.iter().zip(&ref_weights) {
            nodes.push(mid + half * x);
            weights.push(half * wt);
        }
    }
    Ok(QuadratureRule { nodes, weights })
}
