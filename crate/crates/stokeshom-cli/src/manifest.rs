//! Run manifest: resolved parameters, per-step status, and every artifact the
//! run produced. Timestamps live only here, never in numeric outputs, so the
//! numeric files stay byte-identical across reruns.

use crate::config::Resolved;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub name: String,
    pub status: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub toolkit_version: String,
    /// SHA-256 of the input config text; "none" when no config file was given.
    pub input_hash: String,
    pub parameters: Resolved,
    pub steps: Vec<StepRecord>,
    pub artifacts: Vec<String>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl Manifest {
    pub fn new(config_text: Option<&str>, parameters: Resolved) -> Self {
        let input_hash = match config_text {
            Some(text) => {
                let mut h = Sha256::new();
                h.update(text.as_bytes());
                format!("{:x}", h.finalize())
            }
            None => "none".to_string(),
        };
        Manifest {
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            input_hash,
            parameters,
            steps: Vec::new(),
            artifacts: Vec::new(),
            started_unix: now_unix(),
            finished_unix: 0,
        }
    }

    pub fn step_ok(&mut self, name: impl Into<String>) {
        self.steps.push(StepRecord { name: name.into(), status: "ok".to_string() });
    }

    pub fn step_failed(&mut self, name: impl Into<String>, error: &str) {
        self.steps.push(StepRecord { name: name.into(), status: format!("failed: {error}") });
    }

    pub fn artifact(&mut self, path: &Path) {
        self.artifacts.push(path.to_string_lossy().into_owned());
    }

    pub fn all_ok(&self) -> bool {
        self.steps.iter().all(|s| s.status == "ok")
    }

    /// Finalizes and writes `manifest.json` into the output directory.
    pub fn write(mut self, out_dir: &Path) -> anyhow::Result<bool> {
        self.finished_unix = now_unix();
        let ok = self.all_ok();
        let path = out_dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&self)?)?;
        Ok(ok)
    }
}
