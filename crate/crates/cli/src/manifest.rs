use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Provenance record written next to every set of outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the canonical JSON configuration.
    pub config_hash: String,
    pub tool_version: String,
    pub base_seed: Option<u64>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub outputs: Vec<String>,
}

pub fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

pub fn config_hash(canonical_json: &str) -> String {
    let digest = Sha256::digest(canonical_json.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Tracks outputs and writes the manifest once the command finishes.
pub struct Recorder {
    command: String,
    hash: String,
    seed: Option<u64>,
    started: u128,
    outputs: Vec<PathBuf>,
}

impl Recorder {
    pub fn new(command: &str, canonical_json: &str, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            hash: config_hash(canonical_json),
            seed,
            started: now_ms(),
            outputs: Vec::new(),
        }
    }

    pub fn write(&mut self, path: &Path, contents: &str) -> Result<(), String> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| format!("cannot create {}: {e}", parent.display()))?;
        }
        std::fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }

    pub fn finish(self, manifest_path: &Path) -> Result<(), String> {
        let m = RunManifest {
            command: self.command,
            config_hash: self.hash,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            base_seed: self.seed,
            started_unix_ms: self.started,
            finished_unix_ms: now_ms(),
            outputs: self.outputs.iter().map(|p| p.display().to_string()).collect(),
        };
        let text = serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n";
        std::fs::write(manifest_path, text).map_err(|e| format!("cannot write {}: {e}", manifest_path.display()))
    }
}
