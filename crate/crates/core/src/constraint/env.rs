//! Frozen snapshots of observed property values.

use std::collections::BTreeMap;

use crate::constraint::registry::PropertyName;
use crate::daw::{ClusterSpec, NodeDescriptor};
use crate::ids::{LabelId, NodeId, TaskId};
use crate::value::Value;

/// One observed value plus the object it was read from.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub value: Value,
    pub file: Option<String>,
    pub detail: Option<String>,
}

impl Observation {
    pub fn new(value: Value) -> Self {
        Observation {
            value,
            file: None,
            detail: None,
        }
    }

    pub fn with_file(mut self, file: impl Into<String>) -> Self {
        self.file = Some(file.into());
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

impl From<Value> for Observation {
    fn from(v: Value) -> Self {
        Observation::new(v)
    }
}

/// How far a task got in its last attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    /// Before-checks were evaluated; the command did not start.
    Dispatched,
    /// The command started but did not complete normally.
    Launched,
    /// The command ran to completion and after-checks were evaluated.
    Completed,
}

type Props = BTreeMap<PropertyName, Observation>;

/// Property values as observed at check points.
///
/// Task-level evidence is keyed by task, since each task executes in exactly
/// one step; label evidence is keyed by dependency edge so that inputs (read
/// by the consumer) and outputs (written by the producer) stay distinct.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PropertyEnvironment {
    pub cluster: ClusterSpec,
    pub nodes: BTreeMap<NodeId, Props>,
    pub tasks: BTreeMap<TaskId, Props>,
    /// Node properties as seen by a task at dispatch, `P_C(s,t)`.
    pub task_nodes: BTreeMap<TaskId, Props>,
    pub deps: BTreeMap<(TaskId, TaskId), Props>,
    /// Workflow data available before execution.
    pub data: BTreeMap<LabelId, Props>,
    pub phases: BTreeMap<TaskId, Phase>,
}

impl PropertyEnvironment {
    pub fn new(cluster: &ClusterSpec) -> Self {
        PropertyEnvironment {
            cluster: cluster.clone(),
            ..PropertyEnvironment::default()
        }
    }

    pub fn set_task(&mut self, task: &TaskId, name: PropertyName, obs: impl Into<Observation>) {
        self.tasks.entry(task.clone()).or_default().insert(name, obs.into());
    }

    pub fn set_task_node(&mut self, task: &TaskId, name: PropertyName, obs: impl Into<Observation>) {
        self.task_nodes.entry(task.clone()).or_default().insert(name, obs.into());
    }

    pub fn set_dep(&mut self, from: &TaskId, to: &TaskId, name: PropertyName, obs: impl Into<Observation>) {
        self.deps
            .entry((from.clone(), to.clone()))
            .or_default()
            .insert(name, obs.into());
    }

    pub fn set_node(&mut self, node: &NodeId, name: PropertyName, obs: impl Into<Observation>) {
        self.nodes.entry(node.clone()).or_default().insert(name, obs.into());
    }

    pub fn set_data(&mut self, label: &LabelId, name: PropertyName, obs: impl Into<Observation>) {
        self.data.entry(label.clone()).or_default().insert(name, obs.into());
    }

    pub fn set_phase(&mut self, task: &TaskId, phase: Phase) {
        self.phases.insert(task.clone(), phase);
    }

    pub fn phase(&self, task: &TaskId) -> Option<Phase> {
        self.phases.get(task).copied()
    }

    pub fn task_value(&self, task: &TaskId, name: &PropertyName) -> Option<&Observation> {
        self.tasks.get(task)?.get(name)
    }

    pub fn dep_value(&self, from: &TaskId, to: &TaskId, name: &PropertyName) -> Option<&Observation> {
        self.deps.get(&(from.clone(), to.clone()))?.get(name)
    }

    pub fn data_value(&self, label: &LabelId, name: &PropertyName) -> Option<&Observation> {
        self.data.get(label)?.get(name)
    }

    /// Node property: explicit observation first, then the node descriptor.
    pub fn node_value(&self, node: &NodeId, name: &PropertyName) -> Option<Observation> {
        if let Some(obs) = self.nodes.get(node).and_then(|p| p.get(name)) {
            return Some(obs.clone());
        }
        self.cluster.node(node).and_then(|n| descriptor_value(n, name)).map(Observation::new)
    }

    /// Node property as seen by `task` at dispatch, falling back to `node`.
    pub fn task_node_value(&self, task: &TaskId, node: &NodeId, name: &PropertyName) -> Option<Observation> {
        if let Some(obs) = self.task_nodes.get(task).and_then(|p| p.get(name)) {
            return Some(obs.clone());
        }
        self.node_value(node, name)
    }

    /// Whether the environment holds any evidence about `task`.
    pub fn knows_task(&self, task: &TaskId) -> bool {
        self.phases.contains_key(task) || self.tasks.contains_key(task)
    }
}

/// Capacity and inventory properties straight from a node descriptor.
pub fn descriptor_value(node: &NodeDescriptor, name: &PropertyName) -> Option<Value> {
    let clamp = |v: u64| Value::Int(v.min(i64::MAX as u64) as i64);
    Some(match name {
        PropertyName::MemoryBytes => clamp(node.memory_bytes),
        PropertyName::CpuCores => Value::Int(node.cpu_cores as i64),
        PropertyName::GpuCount => Value::Int(node.gpu_count as i64),
        PropertyName::DiskFreeBytes => clamp(node.disk_free_bytes),
        PropertyName::NodeAlive => Value::Bool(node.alive),
        PropertyName::HasExecutable(e) => Value::Bool(node.installed_executables.contains(e)),
        _ => return None,
    })
}
