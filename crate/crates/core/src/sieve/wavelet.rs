use std::sync::OnceLock;

use crate::error::{NpivError, Result};
use crate::numerics::{solve, Mat};

/// Dyadic resolution of the cascade tables: values are exact at multiples of `2^-16`.
pub const CASCADE_LEVELS: u32 = 16;

/// Low-pass filter of the Daubechies family with `n` vanishing moments, normalized to sum `√2`.
pub fn daubechies_filter(n: usize) -> Result<Vec<f64>> {
    let r2 = std::f64::consts::SQRT_2;
    match n {
        1 => Ok(vec![1.0 / r2, 1.0 / r2]),
        2 => {
            let s3 = 3f64.sqrt();
            let d = 4.0 * r2;
            Ok(vec![(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d])
        }
        3 => {
            let s10 = 10f64.sqrt();
            let r = (5.0 + 2.0 * s10).sqrt();
            let d = 16.0 * r2;
            Ok(vec![
                (1.0 + s10 + r) / d,
                (5.0 + s10 + 3.0 * r) / d,
                (10.0 - 2.0 * s10 + 2.0 * r) / d,
                (10.0 - 2.0 * s10 - 2.0 * r) / d,
                (5.0 + s10 - 3.0 * r) / d,
                (1.0 + s10 - r) / d,
            ])
        }
        _ => Err(NpivError::Config(format!(
            "unsupported wavelet with {n} vanishing moments (supported: 1, 2, 3)"
        ))),
    }
}

/// High-pass filter `g_k = (-1)^k h_{2N-1-k}`.
pub fn quadrature_mirror(h: &[f64]) -> Vec<f64> {
    let l = h.len();
    (0..l)
        .map(|k| if k % 2 == 0 { h[l - 1 - k] } else { -h[l - 1 - k] })
        .collect()
}

/// Scaling function and mother wavelet tabulated on `[0, 2N-1]` at spacing `2^-16`.
#[derive(Debug)]
pub struct CascadeTable {
    vanishing_moments: usize,
    phi: Vec<f64>,
    psi: Vec<f64>,
}

impl CascadeTable {
    fn build(n: usize) -> Result<Self> {
        let h = daubechies_filter(n)?;
        let g = quadrature_mirror(&h);
        let taps = h.len();
        let res = 1usize << CASCADE_LEVELS;
        let support = taps - 1;
        let len = support * res + 1;
        let r2 = std::f64::consts::SQRT_2;

        let mut phi = vec![0.0; len];
        if taps == 2 {
            // Haar: indicator of [0, 1)
            phi[0] = 1.0;
        } else {
            // values at interior integers 1..=taps-2: eigenvector of the refinement matrix
            let m = taps - 2;
            let mut a = Mat::zeros(m, m);
            for k in 1..=m {
                for l in 1..=m {
                    let idx = 2 * k as isize - l as isize;
                    let coef = if (0..taps as isize).contains(&idx) {
                        r2 * h[idx as usize]
                    } else {
                        0.0
                    };
                    let delta = if k == l { 1.0 } else { 0.0 };
                    a[(k - 1, l - 1)] = coef - delta;
                }
            }
            // replace the last (redundant) equation by the normalization Σ φ(k) = 1
            for l in 0..m {
                a[(m - 1, l)] = 1.0;
            }
            let mut rhs = vec![0.0; m];
            rhs[m - 1] = 1.0;
            let vals = solve(&a, &rhs)?;
            for (k, v) in vals.into_iter().enumerate() {
                phi[(k + 1) * res] = v;
            }
        }
        // dyadic refinement: φ(x) = √2 Σ_j h_j φ(2x - j)
        for level in 1..=CASCADE_LEVELS {
            let step = res >> level;
            let mut i = step;
            while i < len {
                let mut acc = 0.0;
                for (j, &hj) in h.iter().enumerate() {
                    let arg = 2 * i as isize - (j * res) as isize;
                    if arg >= 0 && (arg as usize) < len {
                        acc += hj * phi[arg as usize];
                    }
                }
                phi[i] = r2 * acc;
                i += 2 * step;
            }
        }
        let psi = (0..len)
            .map(|i| {
                let mut acc = 0.0;
                for (j, &gj) in g.iter().enumerate() {
                    let arg = 2 * i as isize - (j * res) as isize;
                    if arg >= 0 && (arg as usize) < len {
                        acc += gj * phi[arg as usize];
                    }
                }
                r2 * acc
            })
            .collect();
        Ok(Self {
            vanishing_moments: n,
            phi,
            psi,
        })
    }

    /// Cached table for `n` vanishing moments.
    pub fn get(n: usize) -> Result<&'static CascadeTable> {
        static TABLES: [OnceLock<CascadeTable>; 3] =
            [OnceLock::new(), OnceLock::new(), OnceLock::new()];
        if !(1..=3).contains(&n) {
            daubechies_filter(n)?;
        }
        let cell = &TABLES[n - 1];
        if let Some(t) = cell.get() {
            return Ok(t);
        }
        let built = Self::build(n)?;
        Ok(cell.get_or_init(|| built))
    }

    /// Length of the support `[0, 2N-1]`.
    pub fn support(&self) -> f64 {
        (2 * self.vanishing_moments - 1) as f64
    }

    fn lookup(&self, table: &[f64], u: f64) -> f64 {
        if !(0.0..self.support()).contains(&u) {
            return 0.0;
        }
        let pos = u * (1u64 << CASCADE_LEVELS) as f64;
        let i = pos.floor() as usize;
        if self.vanishing_moments == 1 {
            return table[i];
        }
        let frac = pos - i as f64;
        if i + 1 >= table.len() {
            return table[table.len() - 1];
        }
        table[i] * (1.0 - frac) + table[i + 1] * frac
    }

    /// Scaling function `φ(u)`.
    pub fn phi(&self, u: f64) -> f64 {
        self.lookup(&self.phi, u)
    }

    /// Mother wavelet `ψ(u)`.
    pub fn psi(&self, u: f64) -> f64 {
        self.lookup(&self.psi, u)
    }

    /// Tabulated `φ` values; entry `i` is `φ(i / 2^16)`.
    pub fn phi_table(&self) -> &[f64] {
        &self.phi
    }

    pub fn psi_table(&self) -> &[f64] {
        &self.psi
    }
}

/// Periodized wavelet basis on [0, 1]: scaling functions at the coarse level followed by
/// wavelets ordered by (level, shift).
#[derive(Debug, Clone, Copy)]
pub struct WaveletBasis {
    table: &'static CascadeTable,
    coarse_level: u32,
    fine_level: u32,
}

impl WaveletBasis {
    pub fn new(vanishing_moments: usize, coarse_level: u32, fine_level: u32) -> Result<Self> {
        if fine_level < coarse_level {
            return Err(NpivError::Config(format!(
                "wavelet fine level {fine_level} below coarse level {coarse_level}"
            )));
        }
        Ok(Self {
            table: CascadeTable::get(vanishing_moments)?,
            coarse_level,
            fine_level,
        })
    }

    pub fn dim(&self) -> usize {
        1 << self.fine_level
    }

    /// `Σ_l 2^{j/2} f(2^j (x + l) - k)` over the integer shifts `l` that hit the support.
    fn periodized(&self, psi: bool, j: u32, k: usize, x: f64) -> f64 {
        let scale = (1u64 << j) as f64;
        let supp = self.table.support();
        let lo = (k as f64 / scale - x).ceil() as i64;
        let hi = ((k as f64 + supp) / scale - x).floor() as i64;
        let mut acc = 0.0;
        for l in lo..=hi {
            let u = scale * (x + l as f64) - k as f64;
            acc += if psi { self.table.psi(u) } else { self.table.phi(u) };
        }
        scale.sqrt() * acc
    }

    pub fn eval_into(&self, x: f64, out: &mut [f64]) -> Result<()> {
        if !(0.0..=1.0).contains(&x) {
            return Err(NpivError::Domain(format!("wavelet argument {x} outside [0, 1]")));
        }
        let mut idx = 0;
        for k in 0..(1usize << self.coarse_level) {
            out[idx] = self.periodized(false, self.coarse_level, k, x);
            idx += 1;
        }
        for j in self.coarse_level..self.fine_level {
            for k in 0..(1usize << j) {
                out[idx] = self.periodized(true, j, k, x);
                idx += 1;
            }
        }
        Ok(())
    }
}

/// Periodized wavelet basis values at `x`.
pub fn wavelet_eval(
    vanishing_moments: usize,
    coarse_level: u32,
    fine_level: u32,
    x: f64,
) -> Result<Vec<f64>> {
    let basis = WaveletBasis::new(vanishing_moments, coarse_level, fine_level)?;
    let mut out = vec![0.0; basis.dim()];
    basis.eval_into(x, &mut out)?;
    Ok(out)
}
