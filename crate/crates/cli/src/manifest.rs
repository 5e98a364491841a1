//! Run manifest: what ran, with which config hash and seeds, and which
//! artifacts it produced.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use symtrain_core::Result;

use crate::config::RunConfig;
use crate::io_util::write_atomic;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 over the canonical JSON of the fully resolved config.
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub artifacts: Vec<PathBuf>,
}

pub fn config_hash(cfg: &RunConfig) -> Result<String> {
    let canonical = cfg.canonical_json()?;
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    Ok(hex::encode(hasher.finalize()))
}

pub fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn begin(command: &str, cfg: &RunConfig, seeds: Vec<u64>) -> Result<Self> {
        Ok(RunManifest {
            command: command.to_string(),
            config_hash: config_hash(cfg)?,
            seeds,
            started_unix: now_unix(),
            finished_unix: 0,
            artifacts: Vec::new(),
        })
    }

    pub fn record(&mut self, path: &Path) {
        self.artifacts.push(path.to_path_buf());
    }

    /// Stamp the end time and write the manifest itself (also recorded).
    pub fn finish(mut self, path: &Path) -> Result<()> {
        self.finished_unix = now_unix();
        self.artifacts.push(path.to_path_buf());
        write_atomic(path, &serde_json::to_string_pretty(&self)?)?;
        Ok(())
    }
}
