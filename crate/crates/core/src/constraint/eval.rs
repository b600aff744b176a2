//! Evaluation of constraints against a frozen property environment.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::catalog::CheckTime;
use super::env::{descriptor_value, Observation, Phase, PropertyEnvironment};
use super::registry::PropertyName;
use super::report::{CheckPoint, ViolationReport};
use super::{Direction, NodeSel, Quantifier, Target, ValidityConstraint, VcKind};
use crate::daw::{ClusterSpec, Dependency, ExecutionTrace, LogicalDaw, Schedule};
use crate::ids::{NodeId, TaskId};
use crate::value::Value;

/// Outcome of evaluating one constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Holds,
    Violated,
    /// The property could not be resolved. Never silently true or false.
    Unevaluable,
    /// The constraint does not concern this scope (its task did not run here).
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub status: Status,
    pub observed: Option<Value>,
    pub task: Option<TaskId>,
    pub node: Option<NodeId>,
    pub file: Option<String>,
    pub detail: Option<String>,
    /// The check time the evidence belongs to.
    pub check_time: Option<CheckTime>,
}

impl Evaluation {
    fn new(status: Status) -> Self {
        Evaluation {
            status,
            observed: None,
            task: None,
            node: None,
            file: None,
            detail: None,
            check_time: None,
        }
    }

    fn not_applicable() -> Self {
        Evaluation::new(Status::NotApplicable)
    }

    fn unevaluable(detail: impl Into<String>) -> Self {
        let mut e = Evaluation::new(Status::Unevaluable);
        e.detail = Some(detail.into());
        e
    }

    fn task(mut self, t: &TaskId) -> Self {
        self.task = Some(t.clone());
        self
    }

    fn node(mut self, n: &NodeId) -> Self {
        self.node = Some(n.clone());
        self
    }

    fn at(mut self, time: Option<CheckTime>) -> Self {
        self.check_time = time;
        self
    }

    pub fn holds(&self) -> bool {
        self.status == Status::Holds
    }
}

/// Compares an observation with the constant of `vc`.
fn compare(vc: &ValidityConstraint, obs: Option<Observation>, what: &str) -> Evaluation {
    let Some(obs) = obs else {
        return Evaluation::unevaluable(format!("no value for {what}.{}", vc.lhs.name));
    };
    let status = match vc.op.apply(&obs.value, &vc.rhs) {
        Some(true) => Status::Holds,
        Some(false) => Status::Violated,
        None => {
            let mut e = Evaluation::unevaluable(format!(
                "observed {} cannot be compared with {}",
                obs.value, vc.rhs
            ));
            e.observed = Some(obs.value);
            return e;
        }
    };
    Evaluation {
        status,
        observed: Some(obs.value),
        task: None,
        node: None,
        file: obs.file,
        detail: obs.detail,
        check_time: None,
    }
}

/// Folds per-node evaluations under a quantifier.
///
/// Existential: holds if any node holds; otherwise unevaluable if any node
/// was, else violated (reporting the node closest to satisfying it).
/// Universal: the first violated or unevaluable node decides.
fn fold_nodes(vc: &ValidityConstraint, per_node: Vec<Evaluation>, q: Quantifier) -> Evaluation {
    match q {
        Quantifier::AtLeastOneNode => {
            if let Some(e) = per_node.iter().find(|e| e.holds()) {
                return e.clone();
            }
            if let Some(e) = per_node.iter().find(|e| e.status == Status::Unevaluable) {
                return e.clone();
            }
            let best = per_node
                .iter()
                .filter(|e| e.observed.is_some())
                .max_by(|a, b| closeness(vc, a, b));
            match best {
                Some(e) => {
                    let mut e = e.clone();
                    e.detail = Some(format!(
                        "no node satisfies the constraint; best available is `{}` with {}",
                        e.node.as_ref().map(|n| n.as_str()).unwrap_or("?"),
                        e.observed.as_ref().map(|v| v.to_string()).unwrap_or_default()
                    ));
                    e
                }
                None => {
                    let mut e = Evaluation::new(Status::Violated);
                    e.detail = Some("the cluster has no nodes".into());
                    e
                }
            }
        }
        Quantifier::AllNodes => per_node
            .into_iter()
            .find(|e| e.status != Status::Holds)
            .unwrap_or_else(|| Evaluation::new(Status::Holds)),
    }
}

/// Orders two failing node evaluations so that the one nearer the bound is greater.
fn closeness(vc: &ValidityConstraint, a: &Evaluation, b: &Evaluation) -> std::cmp::Ordering {
    use crate::value::ComparisonOp::*;
    let (Some(x), Some(y)) = (a.observed.as_ref(), b.observed.as_ref()) else {
        return std::cmp::Ordering::Equal;
    };
    let ord = x.compare(y).unwrap_or(std::cmp::Ordering::Equal);
    match vc.op {
        Ge | Gt => ord,
        Le | Lt => ord.reverse(),
        Eq => std::cmp::Ordering::Equal,
    }
}

fn static_node_value(env: &PropertyEnvironment, cluster: &ClusterSpec, node: &NodeId, name: &PropertyName) -> Option<Observation> {
    if let Some(obs) = env.nodes.get(node).and_then(|p| p.get(name)) {
        return Some(obs.clone());
    }
    cluster.node(node).and_then(|n| descriptor_value(n, name)).map(Observation::new)
}

/// Static task properties readable without running anything.
fn static_task_value(
    daw: &LogicalDaw,
    cluster: &ClusterSpec,
    env: &PropertyEnvironment,
    task: &TaskId,
    name: &PropertyName,
) -> Option<Observation> {
    if let Some(obs) = env.task_value(task, name) {
        return Some(obs.clone());
    }
    match name {
        PropertyName::ConfigParam(key) => daw
            .task_def(task)
            .and_then(|d| d.params.get(key))
            .cloned()
            .map(Observation::new),
        PropertyName::LicenseAvailable(l) => Some(Observation::new(Value::Bool(cluster.licenses.contains(l)))),
        _ => None,
    }
}

/// Evaluates a static constraint over the workflow and cluster.
pub fn evaluate_static(
    vc: &ValidityConstraint,
    daw: &LogicalDaw,
    cluster: &ClusterSpec,
    env: &PropertyEnvironment,
) -> Evaluation {
    if vc.kind != VcKind::Static {
        return Evaluation::unevaluable(format!("`{}` is not a static constraint", vc.id));
    }
    let name = &vc.lhs.name;
    let e = match &vc.lhs.target {
        Target::Task(t) => {
            if !daw.tasks.contains(t) {
                Evaluation::unevaluable(format!("unknown task `{t}`"))
            } else {
                compare(vc, static_task_value(daw, cluster, env, t, name), &format!("task({t})")).task(t)
            }
        }
        Target::Label { label, .. } => {
            let mut e = compare(vc, env.data_value(label, name).cloned(), &format!("data({label})"));
            if e.file.is_none() {
                e.file = Some(label.to_string());
            }
            e
        }
        Target::Node(NodeSel::Id(n)) => {
            if cluster.node(n).is_none() {
                Evaluation::unevaluable(format!("unknown node `{n}`"))
            } else {
                compare(vc, static_node_value(env, cluster, n, name), &format!("node({n})")).node(n)
            }
        }
        Target::Node(NodeSel::Cluster) => {
            let per_node = cluster
                .nodes
                .iter()
                .map(|n| compare(vc, static_node_value(env, cluster, &n.id, name), &format!("node({})", n.id)).node(&n.id))
                .collect();
            fold_nodes(vc, per_node, vc.quantifier.unwrap_or(Quantifier::AllNodes))
        }
        Target::Node(NodeSel::ScheduledNodeOf(_)) => {
            Evaluation::unevaluable("a static constraint cannot read the scheduled node")
        }
    };
    let mut e = e.at(Some(CheckTime::Before));
    if e.task.is_none() {
        e.task = vc.task.clone();
    }
    e
}

/// The tasks finished in one step with their dependencies and nodes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scope {
    /// 1-based: step `s` is the transition from state `s-1` to state `s`.
    pub step_index: usize,
    pub executed: BTreeSet<TaskId>,
    pub incoming: Vec<Dependency>,
    pub outgoing: Vec<Dependency>,
    pub node_of: BTreeMap<TaskId, NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScopeError {
    #[error("step {step} is out of range; the trace has {steps} steps")]
    OutOfRange { step: usize, steps: usize },
    #[error("task `{0}` has no node assignment")]
    Unscheduled(TaskId),
}

/// Computes the scope of `step` (1-based).
pub fn compute_scope(
    trace: &ExecutionTrace,
    step: usize,
    daw: &LogicalDaw,
    schedule: &Schedule,
) -> Result<Scope, ScopeError> {
    let steps = trace.states.len().saturating_sub(1);
    if step == 0 || step > steps {
        return Err(ScopeError::OutOfRange { step, steps });
    }
    let before = trace.states[step - 1].finished();
    let after = trace.states[step].finished();
    let executed: BTreeSet<TaskId> = after.difference(&before).cloned().collect();
    let recorded = trace.steps.get(step - 1).map(|r| &r.nodes);

    let mut scope = Scope {
        step_index: step,
        executed: executed.clone(),
        ..Scope::default()
    };
    for t in &executed {
        scope.incoming.extend(daw.incoming(t));
        scope.outgoing.extend(daw.outgoing(t));
        let node = recorded
            .and_then(|r| r.get(t))
            .or_else(|| schedule.node_of(t))
            .ok_or_else(|| ScopeError::Unscheduled(t.clone()))?;
        scope.node_of.insert(t.clone(), node.clone());
    }
    Ok(scope)
}

/// Whether the evidence for `task` covers a constraint checked at `times`.
fn applies(times: &[CheckTime], phase: Phase) -> bool {
    times.iter().any(|t| match t {
        CheckTime::Before => true,
        CheckTime::During => phase >= Phase::Launched,
        CheckTime::After => phase >= Phase::Completed,
    })
}

/// The latest declared check time reached by `phase`.
fn reached_time(times: &[CheckTime], phase: Phase) -> Option<CheckTime> {
    let order = [CheckTime::After, CheckTime::During, CheckTime::Before];
    order
        .into_iter()
        .filter(|t| times.contains(t))
        .find(|t| applies(&[*t], phase))
}

/// Evaluates a dynamic constraint over the scope of one step.
pub fn evaluate_dynamic(vc: &ValidityConstraint, scope: &Scope, env: &PropertyEnvironment) -> Evaluation {
    if vc.kind != VcKind::Dynamic {
        return Evaluation::unevaluable(format!("`{}` is not a dynamic constraint", vc.id));
    }
    if let Some(t) = &vc.task {
        if !scope.executed.contains(t) {
            return Evaluation::not_applicable();
        }
    }
    let times = &vc.metadata.time_of_check;
    // Evidence without a recorded phase is complete (e.g. a replayed trace).
    let phase_of = |t: &TaskId| env.phase(t).unwrap_or(Phase::Completed);
    let name = &vc.lhs.name;

    match &vc.lhs.target {
        Target::Task(t) => {
            if !scope.executed.contains(t) {
                return Evaluation::not_applicable();
            }
            let phase = phase_of(t);
            if !applies(times, phase) {
                return Evaluation::not_applicable();
            }
            compare(vc, env.task_value(t, name).cloned(), &format!("task({t})"))
                .task(t)
                .at(reached_time(times, phase))
        }
        Target::Node(NodeSel::ScheduledNodeOf(t)) => {
            if !scope.executed.contains(t) {
                return Evaluation::not_applicable();
            }
            let phase = phase_of(t);
            if !applies(times, phase) {
                return Evaluation::not_applicable();
            }
            let Some(node) = scope.node_of.get(t) else {
                return Evaluation::unevaluable(format!("task `{t}` has no node in step {}", scope.step_index)).task(t);
            };
            compare(vc, env.task_node_value(t, node, name), &format!("node_of({t})"))
                .task(t)
                .node(node)
                .at(reached_time(times, phase))
        }
        Target::Node(NodeSel::Id(n)) => {
            let phase = vc.task.as_ref().map(phase_of).unwrap_or(Phase::Completed);
            if !applies(times, phase) {
                return Evaluation::not_applicable();
            }
            let mut e = compare(vc, env.node_value(n, name), &format!("node({n})")).node(n);
            e.task = vc.task.clone();
            e.at(reached_time(times, phase))
        }
        Target::Label { label, direction: Some(dir) } => {
            let deps: Vec<&Dependency> = match dir {
                Direction::Incoming => scope
                    .incoming
                    .iter()
                    .filter(|d| d.label == *label && vc.task.as_ref().is_none_or(|t| *t == d.to))
                    .collect(),
                Direction::Outgoing => scope
                    .outgoing
                    .iter()
                    .filter(|d| d.label == *label && vc.task.as_ref().is_none_or(|t| *t == d.from))
                    .collect(),
            };
            if deps.is_empty() {
                return Evaluation::not_applicable();
            }
            let mut result = Evaluation::new(Status::NotApplicable);
            for d in deps {
                let owner = match dir {
                    Direction::Incoming => &d.to,
                    Direction::Outgoing => &d.from,
                };
                let phase = phase_of(owner);
                let mut label_times: Vec<CheckTime> = times.clone();
                if *dir == Direction::Outgoing {
                    // Outputs exist only once the producer completed.
                    label_times.retain(|t| *t == CheckTime::After);
                    if label_times.is_empty() && phase >= Phase::Completed {
                        label_times.push(CheckTime::After);
                    }
                }
                if !applies(&label_times, phase) {
                    continue;
                }
                let time = match dir {
                    Direction::Incoming if times.contains(&CheckTime::Before) => Some(CheckTime::Before),
                    Direction::Incoming => reached_time(times, phase),
                    Direction::Outgoing => Some(CheckTime::After),
                };
                let mut e = compare(vc, env.dep_value(&d.from, &d.to, name).cloned(), &format!("{}", vc.lhs.target))
                    .task(owner)
                    .at(time);
                if e.file.is_none() {
                    e.file = Some(label.to_string());
                }
                match e.status {
                    Status::Holds => result = e,
                    _ => return e,
                }
            }
            result
        }
        Target::Node(NodeSel::Cluster) | Target::Label { direction: None, .. } => {
            Evaluation::unevaluable(format!("`{}` is not resolvable in a step scope", vc.lhs.target))
        }
    }
}

/// Result of checking the setup of a workflow on a cluster.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SetupVerdict {
    /// Every static constraint that did not hold, soft ones as warnings.
    pub reports: Vec<ViolationReport>,
}

impl SetupVerdict {
    /// No hard violation and nothing unevaluable.
    pub fn is_correct(&self) -> bool {
        !self.reports.iter().any(|r| r.is_fatal())
    }

    /// Every static constraint held, soft ones included.
    pub fn is_clean(&self) -> bool {
        self.reports.is_empty()
    }

    pub fn fatal(&self) -> impl Iterator<Item = &ViolationReport> {
        self.reports.iter().filter(|r| r.is_fatal())
    }
}

/// Evaluates every static constraint and collects all failures.
pub fn check_setup(
    daw: &LogicalDaw,
    cluster: &ClusterSpec,
    static_vcs: &[ValidityConstraint],
    env: &PropertyEnvironment,
) -> SetupVerdict {
    let reports = static_vcs
        .iter()
        .filter_map(|vc| {
            let e = evaluate_static(vc, daw, cluster, env);
            ViolationReport::from_evaluation(vc, &e, CheckPoint::PreExecution, e.check_time, 0.0)
        })
        .collect();
    SetupVerdict { reports }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepVerdict {
    pub step: usize,
    pub erroneous: bool,
    pub reports: Vec<ViolationReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionVerdict {
    pub setup: SetupVerdict,
    pub steps: Vec<StepVerdict>,
    pub first_erroneous_step: Option<usize>,
    pub correct: bool,
}

/// Checks a recorded execution: the setup plus every dynamic constraint at every step.
pub fn check_execution(
    daw: &LogicalDaw,
    trace: &ExecutionTrace,
    schedule: &Schedule,
    cluster: &ClusterSpec,
    static_vcs: &[ValidityConstraint],
    dynamic_vcs: &[ValidityConstraint],
    env: &PropertyEnvironment,
) -> Result<ExecutionVerdict, ScopeError> {
    let setup = check_setup(daw, cluster, static_vcs, env);
    let mut steps = Vec::new();
    for s in 1..trace.states.len() {
        let scope = compute_scope(trace, s, daw, schedule)?;
        let time = trace.steps.get(s - 1).map(|r| r.time).unwrap_or(0.0);
        let reports: Vec<ViolationReport> = dynamic_vcs
            .iter()
            .filter_map(|vc| {
                let e = evaluate_dynamic(vc, &scope, env);
                ViolationReport::from_evaluation(vc, &e, CheckPoint::Step(s), e.check_time, time)
            })
            .collect();
        steps.push(StepVerdict {
            step: s,
            erroneous: reports.iter().any(|r| r.is_fatal()),
            reports,
        });
    }
    let first_erroneous_step = steps.iter().find(|v| v.erroneous).map(|v| v.step);
    let correct = setup.is_correct() && first_erroneous_step.is_none();
    Ok(ExecutionVerdict {
        setup,
        steps,
        first_erroneous_step,
        correct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::catalog::{instantiate_catalog, CatalogName, CatalogParams, Severity};
    use crate::constraint::PropertyRef;
    use crate::daw::fixtures::{chain, diamond};
    use crate::daw::{
        enumerate_executions, initial_state, state_from_finished, NodeDescriptor, StepRecord,
    };
    use crate::value::ComparisonOp;
    use proptest::prelude::*;

    const GIB: u64 = 1 << 30;

    fn cluster(mems: &[u64]) -> ClusterSpec {
        ClusterSpec::new(
            mems.iter()
                .enumerate()
                .map(|(i, m)| NodeDescriptor::new(format!("n{}", i + 1), *m, 4))
                .collect(),
        )
    }

    fn mem_vc(bound: u64, q: Quantifier) -> ValidityConstraint {
        instantiate_catalog(
            CatalogName::SetupResourceAvailability,
            CatalogParams {
                kind: Some(VcKind::Static),
                property: Some(PropertyName::MemoryBytes),
                op: Some(ComparisonOp::Ge),
                value: Some(Value::Int(bound as i64)),
                quantifier: Some(q),
                ..CatalogParams::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn memory_bound_at_equality_holds() {
        let c = cluster(&[8 * GIB]);
        let env = PropertyEnvironment::new(&c);
        let e = evaluate_static(&mem_vc(8 * GIB, Quantifier::AllNodes), &chain(), &c, &env);
        assert_eq!(e.status, Status::Holds);
    }

    #[test]
    fn existential_and_universal_folds_differ() {
        let c = cluster(&[8 * GIB, 4 * GIB]);
        let env = PropertyEnvironment::new(&c);
        let all = evaluate_static(&mem_vc(8 * GIB, Quantifier::AllNodes), &chain(), &c, &env);
        assert_eq!(all.status, Status::Violated);
        assert_eq!(all.node, Some(NodeId::new("n2")));
        let any = evaluate_static(&mem_vc(8 * GIB, Quantifier::AtLeastOneNode), &chain(), &c, &env);
        assert_eq!(any.status, Status::Holds);
    }

    #[test]
    fn existential_failure_reports_best_node() {
        let c = cluster(&[4 * GIB, 6 * GIB, 2 * GIB]);
        let env = PropertyEnvironment::new(&c);
        let e = evaluate_static(&mem_vc(16 * GIB, Quantifier::AtLeastOneNode), &chain(), &c, &env);
        assert_eq!(e.status, Status::Violated);
        assert_eq!(e.node, Some(NodeId::new("n2")));
        assert_eq!(e.observed, Some(Value::Int(6 * GIB as i64)));
    }

    #[test]
    fn absent_file_is_false() {
        let c = cluster(&[GIB]);
        let mut env = PropertyEnvironment::new(&c);
        env.set_data(&"reference.fa".into(), PropertyName::FileExists, Value::Bool(false));
        let vc = instantiate_catalog(
            CatalogName::SetupFileMustExist,
            CatalogParams {
                kind: Some(VcKind::Static),
                target: Some(Target::Label { label: "reference.fa".into(), direction: None }),
                ..CatalogParams::default()
            },
        )
        .unwrap();
        let e = evaluate_static(&vc, &chain(), &c, &env);
        assert_eq!(e.status, Status::Violated);
        assert_eq!(e.file.as_deref(), Some("reference.fa"));
    }

    #[test]
    fn missing_value_is_unevaluable() {
        let c = cluster(&[GIB]);
        let env = PropertyEnvironment::new(&c);
        let vc = instantiate_catalog(
            CatalogName::SetupFileMustExist,
            CatalogParams {
                kind: Some(VcKind::Static),
                target: Some(Target::Label { label: "nowhere".into(), direction: None }),
                ..CatalogParams::default()
            },
        )
        .unwrap();
        assert_eq!(evaluate_static(&vc, &chain(), &c, &env).status, Status::Unevaluable);
        let verdict = check_setup(&chain(), &c, &[vc], &env);
        assert!(!verdict.is_correct());
    }

    fn trace_of(daw: &LogicalDaw, finish_order: &[&[&str]]) -> ExecutionTrace {
        let mut trace = ExecutionTrace::new(initial_state(daw).unwrap());
        let mut done = trace.last().finished();
        for (i, group) in finish_order.iter().enumerate() {
            let finished: BTreeSet<TaskId> = group.iter().map(|t| TaskId::new(*t)).collect();
            done.extend(finished.iter().cloned());
            trace.states.push(state_from_finished(daw, &done));
            trace.steps.push(StepRecord {
                finished,
                time: i as f64 + 1.0,
                nodes: BTreeMap::new(),
            });
        }
        trace
    }

    #[test]
    fn diamond_scope() {
        let d = diamond();
        let t = trace_of(&d, &[&["a", "b"], &["c"], &["te"]]);
        let sched = Schedule::uniform(&d, &"n1".into());
        let s = compute_scope(&t, 1, &d, &sched).unwrap();
        assert_eq!(s.executed, ["a", "b"].iter().map(|x| TaskId::new(*x)).collect());
        let inc: BTreeSet<_> = s.incoming.iter().map(|d| (d.from.as_str(), d.to.as_str())).collect();
        assert_eq!(inc, [("ts", "a"), ("ts", "b")].into_iter().collect());
        let out: BTreeSet<_> = s.outgoing.iter().map(|d| (d.from.as_str(), d.to.as_str())).collect();
        assert_eq!(out, [("a", "c"), ("b", "c")].into_iter().collect());
        assert_eq!(s.node_of.len(), 2);
    }

    #[test]
    fn chain_scope_and_range() {
        let d = chain();
        let t = trace_of(&d, &[&["a"], &["te"]]);
        let sched = Schedule::uniform(&d, &"n1".into());
        let s = compute_scope(&t, 1, &d, &sched).unwrap();
        assert_eq!(s.incoming.len(), 1);
        assert_eq!(s.outgoing[0].to, TaskId::new("te"));
        assert!(matches!(compute_scope(&t, 3, &d, &sched), Err(ScopeError::OutOfRange { .. })));
        assert!(matches!(compute_scope(&t, 0, &d, &sched), Err(ScopeError::OutOfRange { .. })));
    }

    #[test]
    fn every_enumerated_step_executes_something() {
        // Under the resolved state semantics a step without an R -> F change cannot occur.
        for d in [chain(), diamond(), crate::daw::fixtures::independent(3)] {
            let sched = Schedule::uniform(&d, &"n1".into());
            for t in enumerate_executions(&d, 1000).unwrap() {
                for s in 1..t.states.len() {
                    assert!(!compute_scope(&t, s, &d, &sched).unwrap().executed.is_empty());
                }
            }
        }
    }

    fn task_vc(entry: CatalogName, task: &str, name: PropertyName, op: ComparisonOp, v: Value) -> ValidityConstraint {
        instantiate_catalog(
            entry,
            CatalogParams {
                property: Some(name),
                op: Some(op),
                value: Some(v),
                ..CatalogParams::for_task(task)
            },
        )
        .unwrap()
    }

    #[test]
    fn dynamic_examples() {
        let d = chain();
        let t = trace_of(&d, &[&["a"], &["te"]]);
        let sched = Schedule::uniform(&d, &"n1".into());
        let scope = compute_scope(&t, 1, &d, &sched).unwrap();
        let c = cluster(&[GIB]);
        let mut env = PropertyEnvironment::new(&c);
        let a = TaskId::new("a");
        env.set_task(&a, PropertyName::RuntimeSeconds, Value::Decimal(3601.0));
        env.set_task(&a, PropertyName::ExitCode, Value::Int(0));
        env.set_dep(&a, &"te".into(), PropertyName::FileSizeBytes, Value::Int(0));

        let runtime = task_vc(CatalogName::TaskEndsWithinLimits, "a", PropertyName::RuntimeSeconds, ComparisonOp::Le, Value::Int(3600));
        assert_eq!(evaluate_dynamic(&runtime, &scope, &env).status, Status::Violated);

        let exit = task_vc(CatalogName::TaskEndsCorrectly, "a", PropertyName::ExitCode, ComparisonOp::Eq, Value::Int(0));
        assert_eq!(evaluate_dynamic(&exit, &scope, &env).status, Status::Holds);

        let size = instantiate_catalog(
            CatalogName::FileFileProperties,
            CatalogParams {
                target: Some(Target::Label { label: "y".into(), direction: Some(Direction::Outgoing) }),
                property: Some(PropertyName::FileSizeBytes),
                op: Some(ComparisonOp::Gt),
                value: Some(Value::Int(0)),
                ..CatalogParams::for_task("a")
            },
        )
        .unwrap();
        let e = evaluate_dynamic(&size, &scope, &env);
        assert_eq!(e.status, Status::Violated);
        assert_eq!(e.check_time, Some(CheckTime::After));
        assert_eq!(e.file.as_deref(), Some("y"));
    }

    #[test]
    fn after_checks_skip_tasks_that_never_completed() {
        let d = chain();
        let t = trace_of(&d, &[&["a"]]);
        let sched = Schedule::uniform(&d, &"n1".into());
        let scope = compute_scope(&t, 1, &d, &sched).unwrap();
        let mut env = PropertyEnvironment::new(&cluster(&[GIB]));
        env.set_phase(&"a".into(), Phase::Dispatched);
        let exit = task_vc(CatalogName::TaskEndsCorrectly, "a", PropertyName::ExitCode, ComparisonOp::Eq, Value::Int(0));
        assert_eq!(evaluate_dynamic(&exit, &scope, &env).status, Status::NotApplicable);
    }

    #[test]
    fn scheduled_node_resource_check() {
        let d = chain();
        let t = trace_of(&d, &[&["a"], &["te"]]);
        let sched = Schedule::uniform(&d, &"n1".into());
        let scope = compute_scope(&t, 1, &d, &sched).unwrap();
        let env = PropertyEnvironment::new(&cluster(&[4 * GIB]));
        let vc = task_vc(
            CatalogName::TaskResourceAvailability,
            "a",
            PropertyName::MemoryBytes,
            ComparisonOp::Ge,
            Value::Int(8 * GIB as i64),
        );
        assert_eq!(vc.lhs.target, Target::Node(NodeSel::ScheduledNodeOf("a".into())));
        let e = evaluate_dynamic(&vc, &scope, &env);
        assert_eq!(e.status, Status::Violated);
        assert_eq!(e.node, Some(NodeId::new("n1")));
    }

    #[test]
    fn first_erroneous_step_is_reported() {
        // Four steps over a chain of three tasks; only the task of step 3 fails.
        let d = LogicalDaw::from_edges(
            "ts",
            "te",
            &[("ts", "a", "x"), ("a", "b", "y"), ("b", "c", "z"), ("c", "te", "w")],
        );
        let t = trace_of(&d, &[&["a"], &["b"], &["c"], &["te"]]);
        let sched = Schedule::uniform(&d, &"n1".into());
        let c = cluster(&[GIB]);
        let mut env = PropertyEnvironment::new(&c);
        for (task, code) in [("a", 0), ("b", 0), ("c", 2)] {
            env.set_task(&task.into(), PropertyName::ExitCode, Value::Int(code));
        }
        let vcs: Vec<_> = ["a", "b", "c"]
            .iter()
            .map(|task| task_vc(CatalogName::TaskEndsCorrectly, task, PropertyName::ExitCode, ComparisonOp::Eq, Value::Int(0)))
            .collect();
        let v = check_execution(&d, &t, &sched, &c, &[], &vcs, &env).unwrap();
        assert!(!v.correct);
        assert_eq!(v.first_erroneous_step, Some(3));
        assert!(!v.steps[0].erroneous && !v.steps[1].erroneous && v.steps[2].erroneous);
        assert_eq!(v.steps[2].reports.len(), 1);
        assert_eq!(v.steps[2].reports[0].task, Some(TaskId::new("c")));

        // Oracle: direct evaluation of every constraint at every step.
        for s in 1..=4 {
            let scope = compute_scope(&t, s, &d, &sched).unwrap();
            let direct = vcs
                .iter()
                .any(|vc| evaluate_dynamic(vc, &scope, &env).status == Status::Violated);
            assert_eq!(direct, v.steps[s - 1].erroneous);
        }
    }

    #[test]
    fn setup_gate_and_vacuity() {
        let d = chain();
        let t = trace_of(&d, &[&["a"], &["te"]]);
        let sched = Schedule::uniform(&d, &"n1".into());
        let c = cluster(&[4 * GIB]);
        let env = PropertyEnvironment::new(&c);
        let ok = check_execution(&d, &t, &sched, &c, &[], &[], &env).unwrap();
        assert!(ok.correct);
        let gated = check_execution(&d, &t, &sched, &c, &[mem_vc(8 * GIB, Quantifier::AllNodes)], &[], &env).unwrap();
        assert!(!gated.correct);
        assert_eq!(gated.first_erroneous_step, None);
        assert_eq!(gated.setup.reports.len(), 1);
    }

    #[test]
    fn soft_violations_do_not_make_steps_erroneous() {
        let d = chain();
        let t = trace_of(&d, &[&["a"], &["te"]]);
        let sched = Schedule::uniform(&d, &"n1".into());
        let c = cluster(&[GIB]);
        let mut env = PropertyEnvironment::new(&c);
        env.set_task(&"a".into(), PropertyName::RuntimeSeconds, Value::Decimal(10.0));
        let mut vc = task_vc(CatalogName::TaskEndsWithinLimits, "a", PropertyName::RuntimeSeconds, ComparisonOp::Le, Value::Int(5));
        vc.metadata.severity = Severity::Soft;
        let v = check_execution(&d, &t, &sched, &c, &[], &[vc], &env).unwrap();
        assert!(v.correct);
        assert_eq!(v.steps[0].reports.len(), 1);
        assert_eq!(v.steps[0].reports[0].verdict, crate::constraint::Verdict::Warned);
    }

    fn cluster_strategy() -> impl Strategy<Value = Vec<u64>> {
        prop::collection::vec(0u64..64, 0..6)
    }

    proptest! {
        #[test]
        fn quantifier_duality(mems in cluster_strategy(), bound in 0u64..64, op_i in 0usize..5) {
            let op = ComparisonOp::ALL[op_i];
            let c = cluster(&mems);
            let env = PropertyEnvironment::new(&c);
            let make = |op: ComparisonOp, q: Quantifier| {
                let mut vc = mem_vc(0, q);
                vc.op = op;
                vc.rhs = Value::Int(bound as i64);
                vc
            };
            let exists = evaluate_static(&make(op, Quantifier::AtLeastOneNode), &chain(), &c, &env).status;
            let all_neg = match op.complement() {
                Some(neg) => evaluate_static(&make(neg, Quantifier::AllNodes), &chain(), &c, &env).status == Status::Holds,
                // `=` has no single complement: realise it as `<` or `>` per node.
                None => mems.iter().all(|m| *m != bound),
            };
            prop_assert_eq!(exists == Status::Violated, all_neg);
        }

        #[test]
        fn evaluation_is_pure(mems in cluster_strategy(), bound in 0u64..64) {
            let c = cluster(&mems);
            let env = PropertyEnvironment::new(&c);
            let vc = mem_vc(bound, Quantifier::AtLeastOneNode);
            prop_assert_eq!(
                evaluate_static(&vc, &chain(), &c, &env),
                evaluate_static(&vc, &chain(), &c, &env)
            );
        }
    }

    #[test]
    fn property_ref_display() {
        let p = PropertyRef {
            target: Target::Node(NodeSel::ScheduledNodeOf("a".into())),
            name: PropertyName::MemoryBytes,
        };
        assert_eq!(p.to_string(), "node_of(a).memory_bytes");
    }
}
