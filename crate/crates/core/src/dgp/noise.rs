use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{NpivError, Result};

/// ChaCha stream reserved for the noise draws of a replication.
pub const NOISE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NoiseFamily {
    Gaussian { sd: f64 },
    /// Student-t with `dof` degrees of freedom, rescaled to standard deviation `scale`.
    StudentT { dof: f64, scale: f64 },
}

/// Error law together with the moment index δ such that `E|ε|^{2+δ} < ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(flatten)]
    pub family: NoiseFamily,
    #[serde(default)]
    pub delta: f64,
}

impl NoiseSpec {
    pub fn gaussian(sd: f64) -> Self {
        Self {
            family: NoiseFamily::Gaussian { sd },
            delta: 0.0,
        }
    }

    pub fn student_t(dof: f64, scale: f64, delta: f64) -> Result<Self> {
        let s = Self {
            family: NoiseFamily::StudentT { dof, scale },
            delta,
        };
        s.validate()?;
        Ok(s)
    }

    /// Heaviest Student-t tail still carrying `2 + δ` moments with margin: `dof = 2 + δ + 0.5`.
    pub fn student_t_for_delta(delta: f64, scale: f64) -> Result<Self> {
        Self::student_t(2.0 + delta + 0.5, scale, delta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(NpivError::Config(format!("moment index δ = {} must be ≥ 0", self.delta)));
        }
        match self.family {
            NoiseFamily::Gaussian { sd } => {
                if !(sd >= 0.0 && sd.is_finite()) {
                    return Err(NpivError::Config(format!("noise sd {sd} must be ≥ 0")));
                }
            }
            NoiseFamily::StudentT { dof, scale } => {
                if !(dof > 2.0) {
                    return Err(NpivError::Config(format!(
                        "Student-t with {dof} degrees of freedom has infinite variance"
                    )));
                }
                if dof <= 2.0 + self.delta {
                    return Err(NpivError::Config(format!(
                        "Student-t with {dof} degrees of freedom lacks 2 + δ = {} moments",
                        2.0 + self.delta
                    )));
                }
                if !(scale >= 0.0 && scale.is_finite()) {
                    return Err(NpivError::Config(format!("noise scale {scale} must be ≥ 0")));
                }
            }
        }
        Ok(())
    }

    /// Standard deviation of one draw.
    pub fn sd(&self) -> f64 {
        match self.family {
            NoiseFamily::Gaussian { sd } => sd,
            NoiseFamily::StudentT { scale, .. } => scale,
        }
    }
}

/// `n` i.i.d. draws on the noise stream of `seed`.
pub fn draw_noise(spec: &NoiseSpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(NOISE_STREAM);
    Ok(match spec.family {
        NoiseFamily::Gaussian { sd } => (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            })
            .collect(),
        NoiseFamily::StudentT { dof, scale } => {
            let t = StudentT::new(dof)
                .map_err(|e| NpivError::Config(format!("Student-t: {e}")))?;
            let standardize = scale * ((dof - 2.0) / dof).sqrt();
            (0..n).map(|_| standardize * t.sample(&mut rng)).collect()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_errors() {
        assert!(NoiseSpec::student_t(2.0, 1.0, 0.0).is_err());
        assert!(NoiseSpec::student_t(2.4, 1.0, 0.5).is_err());
        assert!(NoiseSpec::student_t(2.5, 1.0, 0.4).is_ok());
        assert!(draw_noise(&NoiseSpec::gaussian(-1.0), 3, 0).is_err());
    }

    #[test]
    fn delta_rule() {
        let s = NoiseSpec::student_t_for_delta(0.5, 1.0).unwrap();
        assert_eq!(s.family, NoiseFamily::StudentT { dof: 3.0, scale: 1.0 });
    }

    #[test]
    fn deterministic_and_standardized() {
        let a = draw_noise(&NoiseSpec::gaussian(2.0), 1000, 7).unwrap();
        assert_eq!(a, draw_noise(&NoiseSpec::gaussian(2.0), 1000, 7).unwrap());
        assert_ne!(a, draw_noise(&NoiseSpec::gaussian(2.0), 1000, 8).unwrap());
        let t = NoiseSpec::student_t(5.0, 1.0, 0.0).unwrap();
        let e = draw_noise(&t, 200_000, 1).unwrap();
        let var = e.iter().map(|v| v * v).sum::<f64>() / e.len() as f64;
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn serde_block() {
        let s = NoiseSpec::student_t(3.0, 0.5, 0.5).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(text, r#"{"family":"student_t","dof":3.0,"scale":0.5,"delta":0.5}"#);
        assert_eq!(serde_json::from_str::<NoiseSpec>(&text).unwrap(), s);
    }
}
