// Copyright (c) 2026 The labelflow Authors.
// SPDX-License-Identifier: Apache-2.0

//! Suite configuration. Every field has a default, so an empty file
//! describes the full backbone experiment.
//!
//! ```toml
//! topology = "topologies/us_backbone.topo"   # built-in backbone if omitted
//! mode = "mechanism"                         # or "legacy"
//! thresholds = [[0.8, 0.4], [0.9, 0.7]]      # (cong_th, warn_th) pairs
//! replications = 20
//! allocation_policy = "always"               # or "on_tree_change"
//! output_dir = "results"
//!
//! [metrics]
//! norm = 1
//! warn = 1000
//! cong = 65535
//!
//! [traffic]
//! seed = 1
//! sim_time = 100.0
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{AllocationPolicy, ThresholdConfig};
use crate::engine::{EngineConfig, Mode, Scenario};
use crate::topology::{load_topology, load_topology_file, MetricValues, ParseError, Topology, US_BACKBONE};
use crate::traffic::TrafficConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("topology: {0}")]
    Topology(#[from] ParseError),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Timers {
    /// seconds between link statistics rounds
    pub measurement_interval: f64,
    /// idle timeout of demoted label entries
    pub gc_timeout: f64,
    pub dft_idle_timeout: f64,
    pub legacy_idle_timeout: f64,
    /// period of the switch expiry scan
    pub gc_interval: f64,
}

impl Default for Timers {
    fn default() -> Self {
        Timers {
            measurement_interval: 1.0,
            gc_timeout: 1.0,
            dft_idle_timeout: 1.0,
            legacy_idle_timeout: 1.0,
            gc_interval: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Access {
    /// bits per second, both directions
    pub capacity: f64,
    /// seconds; reported only
    pub delay: f64,
}

impl Default for Access {
    fn default() -> Self {
        Access {
            capacity: 1e9,
            delay: 0.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topology: Option<PathBuf>,
    pub mode: Mode,
    /// `(cong_th, warn_th)` pairs
    pub thresholds: Vec<(f64, f64)>,
    pub replications: u64,
    pub allocation_policy: AllocationPolicy,
    pub output_dir: PathBuf,
    pub metrics: MetricValues,
    pub timers: Timers,
    pub access: Access,
    pub traffic: TrafficConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let mut thresholds = Vec::new();
        for cong in [0.8, 0.85, 0.9] {
            for warn in [0.4, 0.5, 0.6, 0.7] {
                thresholds.push((cong, warn));
            }
        }
        ScenarioConfig {
            topology: None,
            mode: Mode::Mechanism,
            thresholds,
            replications: 20,
            allocation_policy: AllocationPolicy::Always,
            output_dir: PathBuf::from("results"),
            metrics: MetricValues::default(),
            timers: Timers::default(),
            access: Access::default(),
            traffic: TrafficConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config; a relative topology path resolves against the
    /// config file's directory.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let (Some(t), Some(dir)) = (cfg.topology.as_mut(), path.parent()) {
            if t.is_relative() {
                *t = dir.join(&*t);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.thresholds.is_empty() {
            return invalid("at least one threshold pair is required".into());
        }
        for &(cong, warn) in &self.thresholds {
            if ThresholdConfig::new(warn, cong, self.timers.measurement_interval).is_err() {
                return invalid(format!(
                    "threshold pair (cong {cong}, warn {warn}) needs 0 < warn < cong < 1 and a positive interval"
                ));
            }
        }
        if self.replications < 1 {
            return invalid("replications must be >= 1".into());
        }
        self.traffic
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for (i, _) in self.thresholds.iter().enumerate() {
            self.engine_config(i)
                .validate()
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    pub fn load_topology(&self) -> Result<Topology, ConfigError> {
        Ok(match &self.topology {
            Some(p) => load_topology_file(p)?,
            None => load_topology(US_BACKBONE)?,
        })
    }

    /// Engine settings for threshold cell `cell`.
    pub fn engine_config(&self, cell: usize) -> EngineConfig {
        let (cong, warn) = self.thresholds[cell];
        EngineConfig {
            mode: self.mode,
            thresholds: ThresholdConfig {
                warn_th: warn,
                cong_th: cong,
                measurement_interval: self.timers.measurement_interval,
            },
            metric_values: self.metrics,
            policy: self.allocation_policy,
            gc_timeout: self.timers.gc_timeout,
            dft_idle_timeout: self.timers.dft_idle_timeout,
            legacy_idle_timeout: self.timers.legacy_idle_timeout,
            gc_interval: self.timers.gc_interval,
            access_capacity: self.access.capacity,
            sim_time: self.traffic.sim_time,
            warmup: self.traffic.warmup,
        }
    }

    pub fn scenario(&self, topology: Arc<Topology>, cell: usize, replication: u64) -> Scenario {
        Scenario {
            topology,
            engine: self.engine_config(cell),
            traffic: self.traffic,
            replication,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_full_experiment() {
        let cfg = ScenarioConfig::from_toml_str("").unwrap();
        assert_eq!(cfg.thresholds.len(), 12);
        assert_eq!(cfg.thresholds[0], (0.8, 0.4));
        assert_eq!(cfg.replications, 20);
        assert_eq!(
            cfg.metrics,
            MetricValues {
                norm: 1,
                warn: 1000,
                cong: 65535
            }
        );
        assert_eq!(cfg.traffic.sim_time, 100.0);
        assert_eq!(cfg.timers.gc_timeout, 1.0);
        assert_eq!(cfg.allocation_policy, AllocationPolicy::Always);
        assert_eq!(cfg.load_topology().unwrap().node_count(), 39);
    }

    #[test]
    fn round_trip() {
        let text = r#"
            mode = "legacy"
            thresholds = [[0.9, 0.5]]
            replications = 3
            allocation_policy = "on_tree_change"
            [traffic]
            seed = 42
            sim_time = 20.0
            warmup = 2.0
        "#;
        let a = ScenarioConfig::from_toml_str(text).unwrap();
        let b = ScenarioConfig::from_toml_str(&a.to_toml_string()).unwrap();
        assert_eq!(a, b);
        assert_eq!(b.mode, Mode::Legacy);
        assert_eq!(b.traffic.seed, 42);
        let d = ScenarioConfig::default();
        assert_eq!(ScenarioConfig::from_toml_str(&d.to_toml_string()).unwrap(), d);
    }

    #[test]
    fn rejects_bad_values() {
        for bad in [
            "thresholds = [[0.4, 0.8]]",
            "thresholds = []",
            "replications = 0",
            "[traffic]\npareto_shape = 0.9",
            "[timers]\ngc_timeout = 0.0",
            "bogus = 1",
        ] {
            assert!(ScenarioConfig::from_toml_str(bad).is_err(), "{bad}");
        }
    }
}
