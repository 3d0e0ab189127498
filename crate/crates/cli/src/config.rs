use std::fs;
use std::path::{Path, PathBuf};

use npiv_core::dgp::{Dependence, DgpConfig};
use npiv_core::estimators::{FitMode, Orthonormalization};
use npiv_core::experiments::presets::Scenario;
use npiv_core::experiments::RateStudyConfig;
use npiv_core::sieve::SieveSpec;
use npiv_core::{NpivError, Result};
use serde::{Deserialize, Serialize};

use crate::manifest::ManifestInfo;

/// Whole configuration file: one optional section per subcommand plus the manifest block
/// written by previous runs (ignored on input).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<ManifestInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<RatesSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concentration: Option<ConcentrationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identifiability: Option<IdentifiabilitySection>,
}

/// `[fit]`: every field may also come from the command line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<FitMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<SieveSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<SieveSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orthonormalization: Option<Orthonormalization>,
    /// Points per axis of the prediction grid; no prediction CSV when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    /// Target smoothness used only for diagnostics warnings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub n: usize,
    pub base_seed: u64,
    /// Points per axis of the oracle grid; no oracle CSV when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_grid: Option<usize>,
    pub dgp: DgpConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunProfile {
    Smoke,
    Acceptance,
}

/// `[rates]`: either a shipped `preset` at a `profile` scale, or a full `study` table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Scenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<RunProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub variance_bias: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub heavy_tail_deltas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<RateStudyConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingBlock {
    #[serde(default)]
    pub dependence: Dependence,
    pub n_grid: Vec<usize>,
    pub k_grid: Vec<usize>,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailBlock {
    #[serde(default)]
    pub dependence: Dependence,
    pub n: usize,
    pub k: usize,
    pub reps: usize,
    pub grid_points: usize,
    /// Block length; defaults to 1 for i.i.d. and `⌈n^{1/3}⌉` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
}

/// `[concentration]`: the basis family is resized to each requested `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationSection {
    pub basis: SieveSpec,
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scaling: Vec<ScalingBlock>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tail: Vec<TailBlock>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    #[default]
    X,
    Y2,
}

/// `[identifiability]`: regressors come from `input` (a sample CSV) or are drawn with `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentifiabilitySection {
    pub basis: SieveSpec,
    pub base_seed: u64,
    pub rayleigh_vectors: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub column: Column,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default)]
    pub dependence: Dependence,
}

/// Parses a TOML config; errors carry the dotted path of the offending field.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = toml::Deserializer::parse(text)
        .map_err(|e| NpivError::Config(format!("(document): {}", e.message())))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "(document)".to_string() } else { path };
        NpivError::Config(format!("{path}: {}", e.inner().message()))
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| NpivError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        NpivError::Config(msg) => NpivError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn to_toml(config: &RunConfig) -> Result<String> {
    toml::to_string(config).map_err(|e| NpivError::Config(format!("cannot serialize config: {e}")))
}

/// Prefixes a validation error with the config field it concerns.
pub fn at_field(field: &str, e: NpivError) -> NpivError {
    match e {
        NpivError::Config(msg) => NpivError::Config(format!("{field}: {msg}")),
        NpivError::Contract(msg) => NpivError::Config(format!("{field}: {msg}")),
        other => other,
    }
}

pub fn missing(field: &str) -> NpivError {
    NpivError::Config(format!("{field}: missing value"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_path_in_errors() {
        let err = parse_config("[simulate]\nn = \"many\"\nbase_seed = 1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("simulate.n"), "{msg}");
        let err = parse_config("[rates]\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("rates"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn round_trip() {
        let text = "[fit]\ninput = \"a.csv\"\nmode = \"npiv\"\npsi = \"cosine:terms=3\"\nb = \"cosine:terms=5\"\n";
        let cfg = parse_config(text).unwrap();
        let again = to_toml(&cfg).unwrap();
        assert_eq!(parse_config(&again).unwrap(), cfg);
        assert_eq!(to_toml(&parse_config(&again).unwrap()).unwrap(), again);
    }
}
