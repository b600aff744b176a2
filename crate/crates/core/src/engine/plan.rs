use std::collections::BTreeMap;

use thiserror::Error;

use super::config::SchedulerPolicy;
use crate::daw::{ClusterSpec, LogicalDaw, NodeDescriptor, ResourceVector, Schedule};
use crate::ids::{NodeId, TaskId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("task `{task}` fits no node: its {dimension} request exceeds every node")]
    Infeasible { task: TaskId, dimension: &'static str },
    #[error("the cluster has no live nodes")]
    NoNodes,
}

fn request(daw: &LogicalDaw, t: &TaskId) -> ResourceVector {
    daw.task_def(t).map(|d| d.resource_request.clone()).unwrap_or_default()
}

fn fits(n: &NodeDescriptor, r: &ResourceVector) -> bool {
    n.alive && r.exceeds(&n.capacity()).is_none()
}

/// Assigns every task to a node whose capacities cover its request.
///
/// The virtual start and end tasks go to the first live node.
pub fn plan(daw: &LogicalDaw, cluster: &ClusterSpec, policy: SchedulerPolicy) -> Result<Schedule, PlanError> {
    assign(daw, cluster, policy, false)
}

/// Like [`plan`], but a task that fits nowhere goes to the node that comes
/// closest, so that the failure surfaces at dispatch instead.
pub fn plan_lenient(daw: &LogicalDaw, cluster: &ClusterSpec, policy: SchedulerPolicy) -> Result<Schedule, PlanError> {
    assign(daw, cluster, policy, true)
}

fn assign(daw: &LogicalDaw, cluster: &ClusterSpec, policy: SchedulerPolicy, lenient: bool) -> Result<Schedule, PlanError> {
    let live: Vec<&NodeDescriptor> = cluster.nodes.iter().filter(|n| n.alive).collect();
    let first = live.first().ok_or(PlanError::NoNodes)?;
    let mut assignment = BTreeMap::new();
    assignment.insert(daw.start.clone(), first.id.clone());
    assignment.insert(daw.end.clone(), first.id.clone());

    let mut tasks: Vec<(TaskId, ResourceVector)> = daw.user_tasks().map(|t| (t.clone(), request(daw, t))).collect();
    // Stable sort keeps task-id order among equal requests.
    tasks.sort_by_key(|t| std::cmp::Reverse(t.1.memory_bytes));

    let mut load: BTreeMap<NodeId, usize> = BTreeMap::new();
    for (t, r) in tasks {
        let candidates = live.iter().filter(|n| fits(n, &r));
        let chosen = match policy {
            SchedulerPolicy::FirstFitMemory => candidates.min_by_key(|_| 0),
            SchedulerPolicy::Spread => candidates.min_by_key(|n| load.get(&n.id).copied().unwrap_or(0)),
        };
        let node = match chosen {
            Some(n) => n.id.clone(),
            None if lenient => closest(&live, &r).id.clone(),
            None => {
                let dimension = live
                    .iter()
                    .filter_map(|n| r.exceeds(&n.capacity()))
                    .next()
                    .unwrap_or("memory_bytes");
                return Err(PlanError::Infeasible { task: t, dimension });
            }
        };
        *load.entry(node.clone()).or_default() += 1;
        assignment.insert(t, node);
    }
    Ok(Schedule { assignment })
}

/// The node with the largest capacity in the first dimension `r` exceeds.
fn closest<'a>(live: &[&'a NodeDescriptor], r: &ResourceVector) -> &'a NodeDescriptor {
    let dim = live.iter().filter_map(|n| r.exceeds(&n.capacity())).next();
    let key = |n: &&NodeDescriptor| -> u64 {
        match dim {
            Some("cpu_cores") => n.cpu_cores as u64,
            Some("gpu_count") => n.gpu_count as u64,
            Some("disk_free_bytes") => n.disk_free_bytes,
            _ => n.memory_bytes,
        }
    };
    // First node among those with the maximal key.
    let best = live.iter().map(key).max().unwrap_or(0);
    live.iter().find(|n| key(n) == best).unwrap()
}

/// Another live node that covers the task's request, for rescheduling.
pub fn alternative_node(daw: &LogicalDaw, cluster: &ClusterSpec, task: &TaskId, current: &NodeId) -> Option<NodeId> {
    let r = request(daw, task);
    cluster
        .nodes
        .iter()
        .find(|n| n.id != *current && fits(n, &r))
        .map(|n| n.id.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    const GIB: u64 = 1 << 30;

    fn daw_with(requests: &[(&str, u64)]) -> LogicalDaw {
        let mut edges = Vec::new();
        for (t, _) in requests {
            edges.push(("ts", *t, "in"));
            edges.push((*t, "te", "out"));
        }
        let mut d = LogicalDaw::from_edges("ts", "te", &edges);
        for (t, m) in requests {
            d.task_defs.get_mut(&TaskId::new(*t)).unwrap().resource_request.memory_bytes = *m;
        }
        d
    }

    fn cluster(mems: &[u64]) -> ClusterSpec {
        ClusterSpec::new(
            mems.iter()
                .enumerate()
                .map(|(i, m)| NodeDescriptor::new(format!("n{i}"), *m, 4))
                .collect(),
        )
    }

    #[test]
    fn capacity_is_per_task() {
        let s = plan(&daw_with(&[("a", 4 * GIB), ("b", 4 * GIB)]), &cluster(&[8 * GIB]), SchedulerPolicy::FirstFitMemory).unwrap();
        assert_eq!(s.node_of(&"a".into()), Some(&NodeId::new("n0")));
        assert_eq!(s.node_of(&"b".into()), Some(&NodeId::new("n0")));
    }

    #[test]
    fn infeasible_names_task_and_dimension() {
        let e = plan(&daw_with(&[("big", 16 * GIB)]), &cluster(&[8 * GIB, 8 * GIB]), SchedulerPolicy::FirstFitMemory).unwrap_err();
        assert_eq!(e, PlanError::Infeasible { task: "big".into(), dimension: "memory_bytes" });
        let s = plan_lenient(&daw_with(&[("big", 16 * GIB)]), &cluster(&[2 * GIB, 8 * GIB]), SchedulerPolicy::FirstFitMemory).unwrap();
        assert_eq!(s.node_of(&"big".into()), Some(&NodeId::new("n1")));
    }

    #[test]
    fn empty_workflow_plans_only_virtual_tasks() {
        let d = LogicalDaw::from_edges("ts", "te", &[("ts", "te", "x")]);
        let s = plan(&d, &cluster(&[GIB]), SchedulerPolicy::FirstFitMemory).unwrap();
        assert_eq!(s.assignment.len(), 2);
    }

    #[test]
    fn first_fit_prefers_big_requests_and_spread_balances() {
        let d = daw_with(&[("small", GIB), ("large", 6 * GIB), ("mid", 3 * GIB)]);
        let c = cluster(&[4 * GIB, 8 * GIB]);
        let s = plan(&d, &c, SchedulerPolicy::FirstFitMemory).unwrap();
        assert_eq!(s.node_of(&"large".into()), Some(&NodeId::new("n1")));
        assert_eq!(s.node_of(&"mid".into()), Some(&NodeId::new("n0")));
        let s = plan(&d, &c, SchedulerPolicy::Spread).unwrap();
        assert_eq!(s.node_of(&"large".into()), Some(&NodeId::new("n1")));
        assert_eq!(s.node_of(&"mid".into()), Some(&NodeId::new("n0")));
        assert_eq!(s.node_of(&"small".into()), Some(&NodeId::new("n0")));
        assert_eq!(plan(&d, &c, SchedulerPolicy::FirstFitMemory).unwrap(), plan(&d, &c, SchedulerPolicy::FirstFitMemory).unwrap());
    }
}
