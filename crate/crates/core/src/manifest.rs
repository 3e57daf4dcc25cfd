//! Manifest recorded next to the artifacts of a CLI invocation.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub epsilon: String,
    pub requests: u64,
    pub accepted: u64,
    pub clipped_reports: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub epsilons: Vec<String>,
    pub started_unix_s: u64,
    pub wall_clock_s: f64,
    pub threads: usize,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    #[serde(default)]
    pub runs: Vec<RunRecord>,
}

impl RunManifest {
    pub fn new(command: &str, config_hash: String, seeds: Vec<u64>, epsilons: Vec<String>, threads: usize) -> Self {
        RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash,
            seeds,
            epsilons,
            started_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            wall_clock_s: 0.0,
            threads,
            artifacts: Vec::new(),
            runs: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Invariant(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut m = RunManifest::new("run", "abc".into(), vec![1, 2], vec!["inf".into(), "0.1".into()], 1);
        m.artifacts.push("outcomes/outcomes_seed1_epsinf.csv".into());
        m.runs.push(RunRecord {
            seed: 1,
            epsilon: "inf".into(),
            requests: 10,
            accepted: 7,
            clipped_reports: 0,
        });
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.json");
        m.write(&p).unwrap();
        assert_eq!(RunManifest::read(&p).unwrap(), m);
    }
}
