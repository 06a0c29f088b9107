//! Per-run record of what was read, what was written, and with which
//! settings. Written next to the primary output as `<out>.manifest.toml`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub inputs: Vec<InputDigest>,
    pub artifacts: Vec<String>,
    pub elapsed_ms: u128,
    /// Full effective configuration, as TOML text.
    pub config: String,
}

pub struct ManifestBuilder {
    command: &'static str,
    seed: u64,
    config: String,
    inputs: Vec<InputDigest>,
    artifacts: Vec<PathBuf>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &'static str, seed: u64, config: String) -> Self {
        Self {
            command,
            seed,
            config,
            inputs: Vec::new(),
            artifacts: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: format!("{:x}", Sha256::digest(&bytes)),
        });
        Ok(())
    }

    pub fn artifact(&mut self, path: &Path) {
        self.artifacts.push(path.to_path_buf());
    }

    /// Writes the manifest beside `primary`.
    pub fn finish(self, primary: &Path) -> Result<(), CliError> {
        let m = RunManifest {
            command: self.command.to_string(),
            seed: self.seed,
            inputs: self.inputs,
            artifacts: self.artifacts.iter().map(|p| p.display().to_string()).collect(),
            elapsed_ms: self.started.elapsed().as_millis(),
            config: self.config,
        };
        let mut name = primary.as_os_str().to_owned();
        name.push(".manifest.toml");
        let text = toml::to_string(&m).expect("manifest serializes");
        std::fs::write(PathBuf::from(name), text).map_err(|e| CliError::Io(e.to_string()))
    }
}
