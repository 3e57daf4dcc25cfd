//! Artifact paths under the output directory.

use std::path::{Path, PathBuf};

use edgepriv::outcome;
use edgepriv::privacy::Epsilon;
use edgepriv::ExperimentConfig;

pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Layout {
            root: root.to_path_buf(),
        }
    }

    /// Directory holding the deployment used by `seed`.
    pub fn topology_dir(&self, config: &ExperimentConfig, seed: u64) -> PathBuf {
        let base = self.root.join("topology");
        if config.topology.resample_topology_per_seed {
            base.join(format!("seed{seed}"))
        } else {
            base
        }
    }

    pub fn topology_files(&self, config: &ExperimentConfig, seed: u64) -> [PathBuf; 2] {
        let dir = self.topology_dir(config, seed);
        [dir.join("bs.csv"), dir.join("mh.csv")]
    }

    pub fn trace(&self, seed: u64) -> PathBuf {
        self.root.join("traces").join(format!("trace_seed{seed}.csv"))
    }

    pub fn outcomes_dir(&self) -> PathBuf {
        self.root.join("outcomes")
    }

    pub fn outcome(&self, seed: u64, epsilon: Epsilon) -> PathBuf {
        self.outcomes_dir().join(outcome::file_name(seed, epsilon))
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }

    pub fn config_copy(&self) -> PathBuf {
        self.root.join("config.toml")
    }

    pub fn manifest(&self, command: &str) -> PathBuf {
        self.root.join(format!("manifest_{command}.json"))
    }

    /// Path relative to the root, with `/` separators.
    pub fn relative(&self, path: &Path) -> String {
        let rel = path.strip_prefix(&self.root).unwrap_or(path);
        rel.components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/")
    }
}
