//! Run manifest: enough to re-run any command identically. Records the
//! command, the fully-resolved arguments, the seed, and SHA-256 digests of
//! every input and output file. No timestamps, so reruns produce
//! byte-identical manifests.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::errors::{CliError, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub command: String,
    /// Fully-resolved arguments/config the command actually ran with.
    pub resolved: serde_json::Value,
    pub seed: u64,
    /// path -> sha256 of every file read.
    pub inputs: BTreeMap<String, String>,
    /// path -> sha256 of every file written (besides the manifest itself).
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, resolved: serde_json::Value, seed: u64) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            resolved,
            seed,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        let digest = sha256_file(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn record_output(&mut self, path: &Path) -> Result<()> {
        let digest = sha256_file(path)?;
        self.outputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    /// Writes `manifest.json` next to the command's outputs.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text)
            .map_err(|e| CliError::io(format!("writing {}: {}", path.display(), e)))?;
        Ok(())
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::io(format!("hashing {}: {}", path.display(), e)))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}
