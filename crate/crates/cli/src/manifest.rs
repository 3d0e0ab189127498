use std::fs;
use std::path::{Path, PathBuf};

use npiv_core::{NpivError, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{to_toml, RunConfig};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputDigest {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Provenance block of a manifest; the rest of the manifest is the resolved config.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestInfo {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub outputs: Vec<OutputDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects artifacts in memory, then writes them together with their manifest.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// Writes every artifact plus `manifest.toml` into `dir`; returns the written paths.
    pub fn write(self, dir: &Path, subcommand: &str, mut resolved: RunConfig) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| NpivError::Io(format!("{}: {e}", dir.display())))?;
        let mut written = Vec::with_capacity(self.files.len() + 1);
        let mut digests = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| NpivError::Io(format!("{}: {e}", path.display())))?;
            digests.push(OutputDigest {
                file: name.clone(),
                bytes: bytes.len() as u64,
                sha256: sha256_hex(bytes),
            });
            written.push(path);
        }
        resolved.manifest = Some(ManifestInfo {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            outputs: digests,
        });
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, to_toml(&resolved)?)
            .map_err(|e| NpivError::Io(format!("{}: {e}", path.display())))?;
        written.push(path);
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
