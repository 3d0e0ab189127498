use serde::{Deserialize, Serialize};

use crate::error::{NpivError, Result};

/// Decay law of the operator singular values `μ_k`, `k ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    /// `μ_k = c·k^{-ς/d}`.
    Mild { varsigma: f64 },
    /// `μ_k = c·exp(-k^{ς/d}/2)`.
    Severe { varsigma: f64 },
}

/// Singular values of the conditional expectation operator beyond the constant function.
///
/// The constant function is always mapped to itself, so the full singular value sequence
/// of the operator is `1, μ_1, μ_2, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IllPosednessProfile {
    #[serde(flatten)]
    pub kind: ProfileKind,
    /// Scale constant `c`.
    pub scale: f64,
    /// Dimension `d` entering the exponent `ς/d`.
    #[serde(default = "one")]
    pub d: usize,
    /// Number of `μ_k` kept.
    #[serde(default = "default_len")]
    pub len: usize,
}

fn one() -> usize {
    1
}

fn default_len() -> usize {
    200
}

impl IllPosednessProfile {
    pub fn mild(varsigma: f64, scale: f64) -> Result<Self> {
        Self::new(ProfileKind::Mild { varsigma }, scale, 1, default_len())
    }

    pub fn severe(varsigma: f64, scale: f64) -> Result<Self> {
        Self::new(ProfileKind::Severe { varsigma }, scale, 1, default_len())
    }

    pub fn new(kind: ProfileKind, scale: f64, d: usize, len: usize) -> Result<Self> {
        let p = Self {
            kind,
            scale,
            d,
            len,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let varsigma = match self.kind {
            ProfileKind::Mild { varsigma } | ProfileKind::Severe { varsigma } => varsigma,
        };
        if !(varsigma > 0.0 && varsigma.is_finite()) {
            return Err(NpivError::Config(format!("ς = {varsigma} must be positive")));
        }
        if !(self.scale >= 0.0 && self.scale.is_finite()) {
            return Err(NpivError::Config(format!("profile scale {} must be non-negative", self.scale)));
        }
        if self.d == 0 || self.len == 0 {
            return Err(NpivError::Config("profile needs d ≥ 1 and len ≥ 1".into()));
        }
        if self.mu(1) > 1.0 {
            return Err(NpivError::Config(format!("μ_1 = {} exceeds 1", self.mu(1))));
        }
        Ok(())
    }

    /// `μ_k` for `k ≥ 1` (zero beyond the truncation length).
    pub fn mu(&self, k: usize) -> f64 {
        if k == 0 || k > self.len {
            return 0.0;
        }
        let e = self.exponent();
        match self.kind {
            ProfileKind::Mild { .. } => self.scale * (k as f64).powf(-e),
            ProfileKind::Severe { .. } => self.scale * (-(k as f64).powf(e) / 2.0).exp(),
        }
    }

    /// `ς/d`.
    pub fn exponent(&self) -> f64 {
        match self.kind {
            ProfileKind::Mild { varsigma } | ProfileKind::Severe { varsigma } => {
                varsigma / self.d as f64
            }
        }
    }

    pub fn is_mild(&self) -> bool {
        matches!(self.kind, ProfileKind::Mild { .. })
    }

    /// `μ_1, …, μ_len`.
    pub fn mu_vec(&self) -> Vec<f64> {
        (1..=self.len).map(|k| self.mu(k)).collect()
    }

    /// `J`-th largest singular value of the operator counting the constant first: `1, μ_1, μ_2, …`.
    pub fn operator_singular_value(&self, j: usize) -> f64 {
        match j {
            0 => f64::NAN,
            1 => 1.0,
            _ => self.mu(j - 1),
        }
    }
}
