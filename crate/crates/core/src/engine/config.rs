use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::daw::{ClusterSpec, NodeDescriptor};
use crate::ids::NodeId;
use crate::value::{parse_quantity, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Real,
    Simulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerPolicy {
    /// Tasks by descending memory request, each on the first node it fits.
    #[default]
    FirstFitMemory,
    /// Tasks by descending memory request, each on the fitting node with the fewest tasks.
    Spread,
}

/// Recovery ladder for hard, recoverable failures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    /// Retries on the same node before moving on.
    pub max_retries: u32,
    /// Whether to move the task to another node once retries are exhausted.
    pub reschedule: bool,
    pub backoff_base_s: f64,
    pub backoff_cap_s: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 1,
            reschedule: true,
            backoff_base_s: 0.1,
            backoff_cap_s: 30.0,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `n` (1-based).
    pub fn backoff(&self, n: u32) -> f64 {
        let exp = n.saturating_sub(1).min(62);
        (self.backoff_base_s * (1u64 << exp) as f64).min(self.backoff_cap_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub mode: Mode,
    pub max_parallel_tasks: usize,
    pub retry: RetryPolicy,
    pub heartbeat_interval_s: f64,
    /// Consecutive missed beats after which a node is declared dead.
    pub heartbeat_miss_threshold: u32,
    /// Interval of during-checks while a task runs.
    pub poll_interval_s: f64,
    pub sandbox_root: Option<PathBuf>,
    pub keep_sandbox: bool,
    /// Directory holding the workflow inputs.
    pub data_dir: Option<PathBuf>,
    /// Directory the final outputs are copied to.
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    pub scheduler: SchedulerPolicy,
    pub static_checks: bool,
    /// JSONL event log destination.
    pub event_log: Option<PathBuf>,
    /// Named input/output predicates: shell commands run in the task sandbox.
    pub relations: BTreeMap<String, String>,
    /// Relative runtime noise in simulation, drawn from the seeded generator.
    pub runtime_jitter: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            mode: Mode::Real,
            max_parallel_tasks: 4,
            retry: RetryPolicy::default(),
            heartbeat_interval_s: 5.0,
            heartbeat_miss_threshold: 3,
            poll_interval_s: 1.0,
            sandbox_root: None,
            keep_sandbox: false,
            data_dir: None,
            output_dir: None,
            seed: 0,
            scheduler: SchedulerPolicy::default(),
            static_checks: true,
            event_log: None,
            relations: BTreeMap::new(),
            runtime_jitter: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid {what}: {message}")]
    Parse { what: &'static str, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl EngineConfig {
    pub fn simulated() -> Self {
        EngineConfig {
            mode: Mode::Simulated,
            retry: RetryPolicy {
                backoff_base_s: 1.0,
                ..RetryPolicy::default()
            },
            ..EngineConfig::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let c: EngineConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            what: "configuration",
            message: e.to_string(),
        })?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!("{name} must be positive, got {v}")))
            }
        };
        positive("heartbeat_interval_s", self.heartbeat_interval_s)?;
        positive("poll_interval_s", self.poll_interval_s)?;
        if self.max_parallel_tasks == 0 {
            return Err(ConfigError::Invalid("max_parallel_tasks must be at least 1".into()));
        }
        if self.heartbeat_miss_threshold == 0 {
            return Err(ConfigError::Invalid("heartbeat_miss_threshold must be at least 1".into()));
        }
        let r = &self.retry;
        if !(r.backoff_base_s >= 0.0 && r.backoff_cap_s >= 0.0) {
            return Err(ConfigError::Invalid("backoff must be nonnegative".into()));
        }
        if !(0.0..1.0).contains(&self.runtime_jitter) {
            return Err(ConfigError::Invalid("runtime_jitter must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Reads a byte count given as an integer or a quantity string such as `"8Gi"`.
fn quantity<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Q {
        Int(u64),
        Text(String),
    }
    match Q::deserialize(d)? {
        Q::Int(n) => Ok(n),
        Q::Text(s) => match parse_quantity(&s) {
            Some(Value::Int(n)) if n >= 0 => Ok(n as u64),
            _ => Err(serde::de::Error::custom(format!("invalid quantity `{s}`"))),
        },
    }
}

fn unlimited() -> u64 {
    u64::MAX / 2
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeFile {
    id: NodeId,
    #[serde(deserialize_with = "quantity")]
    memory_bytes: u64,
    cpu_cores: u32,
    #[serde(default)]
    gpu_count: u32,
    #[serde(default = "unlimited", deserialize_with = "quantity")]
    disk_free_bytes: u64,
    #[serde(default)]
    installed_executables: BTreeSet<String>,
    #[serde(default)]
    present_files: BTreeSet<String>,
    #[serde(default = "yes")]
    alive: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClusterFile {
    nodes: Vec<NodeFile>,
    #[serde(default)]
    licenses: BTreeSet<String>,
    #[serde(default)]
    network_latency_s: Option<f64>,
}

/// Parses a TOML cluster description.
pub fn cluster_from_toml(text: &str) -> Result<ClusterSpec, ConfigError> {
    let f: ClusterFile = toml::from_str(text).map_err(|e| ConfigError::Parse {
        what: "cluster",
        message: e.to_string(),
    })?;
    let cluster = ClusterSpec {
        nodes: f
            .nodes
            .into_iter()
            .map(|n| NodeDescriptor {
                id: n.id,
                memory_bytes: n.memory_bytes,
                cpu_cores: n.cpu_cores,
                gpu_count: n.gpu_count,
                disk_free_bytes: n.disk_free_bytes,
                installed_executables: n.installed_executables,
                present_files: n.present_files,
                alive: n.alive,
            })
            .collect(),
        licenses: f.licenses,
        network_latency_s: f.network_latency_s,
    };
    cluster.validate().map_err(ConfigError::Invalid)?;
    Ok(cluster)
}

/// A one-node cluster describing this host.
pub fn local_cluster() -> ClusterSpec {
    let cores = std::thread::available_parallelism().map(|n| n.get() as u32).unwrap_or(1);
    let memory = std::fs::read_to_string("/proc/meminfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("MemTotal:"))
                .and_then(|l| l.split_whitespace().nth(1))
                .and_then(|kb| kb.parse::<u64>().ok())
        })
        .map(|kb| kb * 1024)
        .unwrap_or(1 << 30);
    ClusterSpec::new(vec![NodeDescriptor::new("local", memory, cores)])
}
