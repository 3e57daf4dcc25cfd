//! Experiment configuration: a TOML document whose every key has a default.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::ApplicationSpec;
use crate::error::{Error, Result};
use crate::geometry::Area;
use crate::link::{LatencyParams, RadioParams};
use crate::mobility::{
    generate_synthetic, ingest_trace, MobilityTrace, PassengerAssignment, PopulationSpec, SyntheticSpec, TraceFormat,
};
use crate::topology::{build_topology, Topology, TopologySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MobilitySource {
    Synthetic,
    /// Ingest `mobility.file`; `{seed}` in the path is replaced by the run seed.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssignmentPolicy {
    Identity,
    RoundRobin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MobilitySpec {
    pub source: MobilitySource,
    pub file: String,
    pub format: TraceFormat,
    pub assignment: AssignmentPolicy,
    pub synthetic: SyntheticSpec,
}

impl Default for MobilitySpec {
    fn default() -> Self {
        MobilitySpec {
            source: MobilitySource::Synthetic,
            file: String::new(),
            format: TraceFormat::PositionsCsv,
            assignment: AssignmentPolicy::Identity,
            synthetic: SyntheticSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PfSpec {
    /// Drop users denied for latency or MH capacity from their BS's sharing
    /// pool and re-share until stable.
    pub iterate_after_denial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub duration_s: f64,
    pub resolution_s: f64,
    pub area: Area,
    pub population: PopulationSpec,
    pub topology: TopologySpec,
    pub mobility: MobilitySpec,
    pub privacy: crate::privacy::PrivacySpec,
    pub radio: RadioParams,
    pub latency: LatencyParams,
    pub pf: PfSpec,
    pub applications: ApplicationSpec,
}

impl Default for ExperimentConfig {
    /// Full reference scale: 1250 users for one hour, 30 seeds.
    fn default() -> Self {
        ExperimentConfig {
            seeds: (1..=30).collect(),
            duration_s: 3600.0,
            resolution_s: 1.0,
            area: Area::default(),
            population: PopulationSpec::default(),
            topology: TopologySpec::default(),
            mobility: MobilitySpec::default(),
            privacy: Default::default(),
            radio: RadioParams::default(),
            latency: LatencyParams::default(),
            pf: PfSpec::default(),
            applications: ApplicationSpec::default(),
        }
    }
}

impl ExperimentConfig {
    /// 125 users for 10 minutes, 3 seeds, on the full-size deployment.
    pub fn desk_scale() -> Self {
        ExperimentConfig {
            seeds: vec![1, 2, 3],
            duration_s: 600.0,
            population: PopulationSpec {
                cars: 40,
                buses: 4,
                passengers_per_bus: 10,
                pedestrians: 45,
            },
            ..Default::default()
        }
    }

    /// Parse TOML text; unknown keys and invalid values are all reported together.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Value = text
            .parse::<toml::Table>()
            .map(toml::Value::Table)
            .map_err(|e| Error::config(format!("TOML syntax: {e}")))?;
        let known = toml::Value::try_from(ExperimentConfig::default()).map_err(|e| Error::Invariant(e.to_string()))?;
        let mut problems = Vec::new();
        unknown_keys(&value, &known, "", &mut problems);
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        let config: ExperimentConfig = value
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(p) => Error::Config(p.into_iter().map(|m| format!("{}: {m}", path.display())).collect()),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let mut p = Vec::new();
        if self.seeds.is_empty() {
            p.push("seeds must list at least one seed".to_string());
        }
        let distinct: BTreeSet<_> = self.seeds.iter().collect();
        if distinct.len() != self.seeds.len() {
            p.push("seeds must be distinct".into());
        }
        if !(self.resolution_s > 0.0 && self.resolution_s.is_finite()) {
            p.push("resolution_s must be positive".into());
        }
        if !(self.duration_s >= 0.0 && self.duration_s.is_finite()) {
            p.push("duration_s must be non-negative".into());
        } else if self.resolution_s > 0.0 {
            let steps = self.duration_s / self.resolution_s;
            if (steps - steps.round()).abs() > 1e-9 {
                p.push("duration_s must be a multiple of resolution_s".into());
            }
        }
        if let Err(Error::Config(mut e)) = Area::new(self.area.width, self.area.height) {
            p.append(&mut e);
        }
        self.topology.validate(&mut p);
        self.privacy.validate(&mut p);
        self.radio.validate(&mut p);
        self.latency.validate(&mut p);
        self.applications.validate(&mut p);
        match self.mobility.source {
            MobilitySource::Synthetic => self.mobility.synthetic.validate(&self.area, &mut p),
            MobilitySource::File => {
                if self.mobility.file.is_empty() {
                    p.push("mobility.file is required when mobility.source = \"file\"".into());
                }
            }
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }

    /// Number of timesteps per run.
    pub fn steps(&self) -> u32 {
        (self.duration_s / self.resolution_s).round() as u32
    }

    /// Requests one (seed, epsilon) run produces.
    pub fn requests_per_run(&self) -> u64 {
        self.population.user_count() as u64 * self.steps() as u64
    }

    pub fn build_topology(&self, seed: u64) -> Result<Topology> {
        build_topology(&self.topology, self.area, self.topology.deployment_seed(seed))
    }

    /// Trace file for `seed` when ingesting.
    pub fn trace_path(&self, seed: u64) -> PathBuf {
        PathBuf::from(self.mobility.file.replace("{seed}", &seed.to_string()))
    }

    pub fn build_trace(&self, seed: u64) -> Result<MobilityTrace> {
        match self.mobility.source {
            MobilitySource::Synthetic => generate_synthetic(
                &self.population,
                &self.mobility.synthetic,
                &self.area,
                self.steps(),
                self.resolution_s,
                seed,
            ),
            MobilitySource::File => {
                let assignment = match self.mobility.assignment {
                    AssignmentPolicy::Identity => PassengerAssignment::Identity,
                    AssignmentPolicy::RoundRobin => PassengerAssignment::RoundRobin,
                };
                let ingested = ingest_trace(
                    &self.trace_path(seed),
                    self.mobility.format,
                    &self.population.users(),
                    &assignment,
                    &self.area,
                    self.resolution_s,
                )?;
                if ingested.clipped > 0 {
                    log_warning(&format!(
                        "seed {seed}: clipped {} out-of-area trace points",
                        ingested.clipped
                    ));
                }
                Ok(ingested.trace)
            }
        }
    }

    /// SHA-256 of the canonical (key-sorted) JSON form; independent of the
    /// key order of the source file.
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical_json(&value).as_bytes());
        hex(&hasher.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn canonical_json(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::Object(map) => {
            let mut keys: Vec<_> = map.keys().collect();
            keys.sort();
            let body: Vec<String> = keys
                .into_iter()
                .map(|k| format!("{}:{}", serde_json::Value::String(k.clone()), canonical_json(&map[k])))
                .collect();
            format!("{{{}}}", body.join(","))
        }
        serde_json::Value::Array(items) => {
            format!("[{}]", items.iter().map(canonical_json).collect::<Vec<_>>().join(","))
        }
        other => other.to_string(),
    }
}

fn unknown_keys(value: &toml::Value, known: &toml::Value, prefix: &str, problems: &mut Vec<String>) {
    let (toml::Value::Table(v), toml::Value::Table(k)) = (value, known) else {
        return;
    };
    for (key, child) in v {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        match k.get(key) {
            None => problems.push(format!("unknown key `{path}`")),
            Some(known_child) => unknown_keys(child, known_child, &path, problems),
        }
    }
}

fn log_warning(msg: &str) {
    eprintln!("warning: {msg}");
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_tables() {
        let c = ExperimentConfig::default();
        assert_eq!(c.seeds.len(), 30);
        assert_eq!(c.population.user_count(), 1250);
        assert_eq!(c.topology.bs_count, 475);
        assert_eq!(c.topology.mh_count, 95);
        assert_eq!(c.area.km2(), 4.0);
        assert_eq!(c.requests_per_run(), 4_500_000);
        assert_eq!(c.privacy.epsilon_per_meter.len(), 3);
    }

    #[test]
    fn default_document_round_trips() {
        let c = ExperimentConfig::default();
        let text = c.to_toml_string();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let c = ExperimentConfig::from_toml_str("seeds = [7]\n[latency]\nbase_ms = 1.0\n").unwrap();
        assert_eq!(c.seeds, vec![7]);
        assert_eq!(c.latency.base_ms, 1.0);
        assert_eq!(c.latency.ms_per_km, LatencyParams::default().ms_per_km);
    }

    #[test]
    fn all_unknown_keys_are_listed() {
        let err = ExperimentConfig::from_toml_str("bogus = 1\n[radio]\nfoo = 2\nbar = 3\n").unwrap_err();
        let Error::Config(p) = err else { panic!() };
        assert_eq!(p.len(), 3, "{p:?}");
        assert!(p.iter().any(|m| m.contains("radio.foo")));
    }

    #[test]
    fn all_invalid_values_are_listed() {
        let err = ExperimentConfig::from_toml_str(
            "seeds = []\n[radio]\nbandwidth_per_ue_hz = -1.0\n[applications]\nmix_car = [50.0, 10.0, 10.0]\n",
        )
        .unwrap_err();
        let Error::Config(p) = err else { panic!() };
        assert_eq!(p.len(), 3, "{p:?}");
    }

    #[test]
    fn infinite_epsilon_spellings() {
        let c = ExperimentConfig::from_toml_str("[privacy]\nepsilon_per_meter = [\"inf\", 0.1]\n").unwrap();
        assert!(c.privacy.epsilon_per_meter[0].is_none());
        let c = ExperimentConfig::from_toml_str("[privacy]\nepsilon_per_meter = [inf, 0.01]\n").unwrap();
        assert!(c.privacy.epsilon_per_meter[0].is_none());
        assert!(ExperimentConfig::from_toml_str("[privacy]\nepsilon_per_meter = [0.0]\n").is_err());
    }

    #[test]
    fn hash_ignores_key_order() {
        let a = ExperimentConfig::from_toml_str("seeds = [1]\nduration_s = 10.0\n").unwrap();
        let b = ExperimentConfig::from_toml_str("duration_s = 10.0\nseeds = [1]\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig::from_toml_str("duration_s = 20.0\nseeds = [1]\n").unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
