//! Logical and physical workflows and their execution semantics.
//!
//! A [`LogicalDaw`] is a DAG of tasks whose edges carry data labels, with a
//! distinguished start and end task. Execution progresses through
//! [`DawState`]s that assign every task one of finished, ready, or open. A
//! state is valid when its finished-set is closed under predecessors and
//! contains the start task, a task is ready exactly when it is not finished
//! and all of its predecessors are, and every other task is open. Valid
//! states are therefore determined by their finished-set.
//!
//! [`enumerate_executions`] walks every maximal chain of successor states and
//! is used as an oracle for the traces produced by the engine.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::ids::{LabelId, NodeId, TaskId};
use crate::lang::ContractSet;
use crate::sim::SimProfile;
use crate::value::Value;

/// Resources a task asks for on its node.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceVector {
    pub memory_bytes: u64,
    pub cpu_cores: u32,
    pub gpu_count: u32,
    pub disk_bytes: u64,
}

impl ResourceVector {
    pub fn is_zero(&self) -> bool {
        *self == ResourceVector::default()
    }

    /// First dimension in which `self` exceeds `capacity`, if any.
    pub fn exceeds(&self, capacity: &ResourceVector) -> Option<&'static str> {
        if self.memory_bytes > capacity.memory_bytes {
            Some("memory_bytes")
        } else if self.cpu_cores > capacity.cpu_cores {
            Some("cpu_cores")
        } else if self.gpu_count > capacity.gpu_count {
            Some("gpu_count")
        } else if self.disk_bytes > capacity.disk_bytes {
            Some("disk_free_bytes")
        } else {
            None
        }
    }

    pub fn saturating_sub(&self, other: &ResourceVector) -> ResourceVector {
        ResourceVector {
            memory_bytes: self.memory_bytes.saturating_sub(other.memory_bytes),
            cpu_cores: self.cpu_cores.saturating_sub(other.cpu_cores),
            gpu_count: self.gpu_count.saturating_sub(other.gpu_count),
            disk_bytes: self.disk_bytes.saturating_sub(other.disk_bytes),
        }
    }

    pub fn add(&self, other: &ResourceVector) -> ResourceVector {
        ResourceVector {
            memory_bytes: self.memory_bytes + other.memory_bytes,
            cpu_cores: self.cpu_cores + other.cpu_cores,
            gpu_count: self.gpu_count + other.gpu_count,
            disk_bytes: self.disk_bytes + other.disk_bytes,
        }
    }
}

/// Definition of one task: what it runs, what it consumes and produces, and
/// the contracts guarding it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskDef {
    pub id: TaskId,
    pub command: Option<String>,
    pub inputs: Vec<LabelId>,
    pub outputs: Vec<LabelId>,
    pub resource_request: ResourceVector,
    /// Runtime limit in seconds.
    pub max_runtime: Option<f64>,
    pub params: BTreeMap<String, Value>,
    pub contracts: ContractSet,
    pub sim_profile: Option<SimProfile>,
}

impl TaskDef {
    pub fn new(id: impl Into<TaskId>) -> Self {
        TaskDef {
            id: id.into(),
            ..TaskDef::default()
        }
    }

    /// Synthetic tasks carry no command and no profile; they complete instantly.
    pub fn is_noop(&self) -> bool {
        self.command.is_none() && self.sim_profile.is_none()
    }
}

/// A labelled dependency edge.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Dependency {
    pub from: TaskId,
    pub to: TaskId,
    pub label: LabelId,
}

impl fmt::Display for Dependency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} -> {}", self.label, self.from, self.to)
    }
}

/// A logical workflow: tasks, labelled dependencies, start and end task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicalDaw {
    pub name: String,
    pub tasks: BTreeSet<TaskId>,
    pub deps: BTreeSet<(TaskId, TaskId)>,
    pub labels: BTreeMap<(TaskId, TaskId), LabelId>,
    pub start: TaskId,
    pub end: TaskId,
    pub task_defs: BTreeMap<TaskId, TaskDef>,
}

impl LogicalDaw {
    /// Builds a workflow from labelled edges. Task definitions default to no-ops.
    pub fn from_edges(
        start: &str,
        end: &str,
        edges: &[(&str, &str, &str)],
    ) -> LogicalDaw {
        let mut tasks = BTreeSet::new();
        tasks.insert(TaskId::new(start));
        tasks.insert(TaskId::new(end));
        let mut deps = BTreeSet::new();
        let mut labels = BTreeMap::new();
        for (from, to, label) in edges {
            tasks.insert(TaskId::new(*from));
            tasks.insert(TaskId::new(*to));
            deps.insert((TaskId::new(*from), TaskId::new(*to)));
            labels.insert((TaskId::new(*from), TaskId::new(*to)), LabelId::new(*label));
        }
        let task_defs = tasks.iter().map(|t| (t.clone(), TaskDef::new(t.clone()))).collect();
        LogicalDaw {
            name: "anonymous".into(),
            tasks,
            deps,
            labels,
            start: TaskId::new(start),
            end: TaskId::new(end),
            task_defs,
        }
    }

    pub fn predecessors(&self, task: &TaskId) -> impl Iterator<Item = &TaskId> + '_ {
        let task = task.clone();
        self.deps.iter().filter(move |(_, to)| *to == task).map(|(from, _)| from)
    }

    pub fn successors(&self, task: &TaskId) -> impl Iterator<Item = &TaskId> + '_ {
        let task = task.clone();
        self.deps.iter().filter(move |(from, _)| *from == task).map(|(_, to)| to)
    }

    pub fn dependency(&self, from: &TaskId, to: &TaskId) -> Option<Dependency> {
        let label = self.labels.get(&(from.clone(), to.clone()))?;
        Some(Dependency {
            from: from.clone(),
            to: to.clone(),
            label: label.clone(),
        })
    }

    /// Incoming labelled dependencies of `task`.
    pub fn incoming(&self, task: &TaskId) -> Vec<Dependency> {
        self.predecessors(task)
            .filter_map(|p| self.dependency(p, task))
            .collect()
    }

    /// Outgoing labelled dependencies of `task`.
    pub fn outgoing(&self, task: &TaskId) -> Vec<Dependency> {
        self.successors(task)
            .filter_map(|s| self.dependency(task, s))
            .collect()
    }

    pub fn predecessor_map(&self) -> BTreeMap<TaskId, BTreeSet<TaskId>> {
        let mut map: BTreeMap<TaskId, BTreeSet<TaskId>> =
            self.tasks.iter().map(|t| (t.clone(), BTreeSet::new())).collect();
        for (from, to) in &self.deps {
            map.entry(to.clone()).or_default().insert(from.clone());
        }
        map
    }

    pub fn task_def(&self, task: &TaskId) -> Option<&TaskDef> {
        self.task_defs.get(task)
    }

    /// Tasks other than the synthetic start and end task.
    pub fn user_tasks(&self) -> impl Iterator<Item = &TaskId> + '_ {
        self.tasks.iter().filter(move |t| **t != self.start && **t != self.end)
    }
}

/// A violated structural rule of a [`LogicalDaw`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StructuralError {
    #[error("start task `{task}` is not among the tasks")]
    MissingStart { task: TaskId },
    #[error("end task `{task}` is not among the tasks")]
    MissingEnd { task: TaskId },
    #[error("dependency {from} -> {to} references an unknown task")]
    UnknownTask { from: TaskId, to: TaskId },
    #[error("start task has incoming dependency from `{from}`")]
    StartHasIncoming { from: TaskId },
    #[error("end task has outgoing dependency to `{to}`")]
    EndHasOutgoing { to: TaskId },
    #[error("cycle through tasks {tasks:?}")]
    Cycle { tasks: Vec<TaskId> },
    #[error("task `{task}` has no incoming dependency (multiple sources)")]
    MultipleSources { task: TaskId },
    #[error("task `{task}` is not reachable from the start task")]
    UnreachableFromStart { task: TaskId },
    #[error("task `{task}` does not reach the end task")]
    CannotReachEnd { task: TaskId },
    #[error("dependency {from} -> {to} has no label")]
    UnlabeledDep { from: TaskId, to: TaskId },
    #[error("label `{label}` is attached to {from} -> {to}, which is not a dependency")]
    LabelWithoutDep { from: TaskId, to: TaskId, label: LabelId },
}

/// Checks every structural invariant of a workflow. Empty iff well-formed.
pub fn validate_structure(daw: &LogicalDaw) -> Vec<StructuralError> {
    let mut errors = Vec::new();
    if !daw.tasks.contains(&daw.start) {
        errors.push(StructuralError::MissingStart { task: daw.start.clone() });
    }
    if !daw.tasks.contains(&daw.end) {
        errors.push(StructuralError::MissingEnd { task: daw.end.clone() });
    }
    for (from, to) in &daw.deps {
        if !daw.tasks.contains(from) || !daw.tasks.contains(to) {
            errors.push(StructuralError::UnknownTask { from: from.clone(), to: to.clone() });
        }
        if *to == daw.start {
            errors.push(StructuralError::StartHasIncoming { from: from.clone() });
        }
        if *from == daw.end {
            errors.push(StructuralError::EndHasOutgoing { to: to.clone() });
        }
        if !daw.labels.contains_key(&(from.clone(), to.clone())) {
            errors.push(StructuralError::UnlabeledDep { from: from.clone(), to: to.clone() });
        }
    }
    for ((from, to), label) in &daw.labels {
        if !daw.deps.contains(&(from.clone(), to.clone())) {
            errors.push(StructuralError::LabelWithoutDep {
                from: from.clone(),
                to: to.clone(),
                label: label.clone(),
            });
        }
    }
    for cycle in find_cycles(daw) {
        errors.push(StructuralError::Cycle { tasks: cycle });
    }

    let preds = daw.predecessor_map();
    for task in &daw.tasks {
        if *task != daw.start && preds.get(task).is_none_or(|p| p.is_empty()) {
            errors.push(StructuralError::MultipleSources { task: task.clone() });
        }
    }
    let forward = reachable(daw, &daw.start, false);
    let backward = reachable(daw, &daw.end, true);
    for task in &daw.tasks {
        let sourceless = *task != daw.start && preds.get(task).is_none_or(|p| p.is_empty());
        if !forward.contains(task) && !sourceless && daw.tasks.contains(&daw.start) {
            errors.push(StructuralError::UnreachableFromStart { task: task.clone() });
        }
        if !backward.contains(task) && daw.tasks.contains(&daw.end) {
            errors.push(StructuralError::CannotReachEnd { task: task.clone() });
        }
    }
    errors
}

fn reachable(daw: &LogicalDaw, from: &TaskId, reverse: bool) -> BTreeSet<TaskId> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([from.clone()]);
    while let Some(t) = queue.pop_front() {
        if !seen.insert(t.clone()) {
            continue;
        }
        for (a, b) in &daw.deps {
            let (src, dst) = if reverse { (b, a) } else { (a, b) };
            if *src == t && !seen.contains(dst) {
                queue.push_back(dst.clone());
            }
        }
    }
    seen
}

/// Strongly connected components with more than one task, plus self-loops.
fn find_cycles(daw: &LogicalDaw) -> Vec<Vec<TaskId>> {
    // Tarjan's algorithm over the task set.
    struct Tarjan<'a> {
        succ: BTreeMap<&'a TaskId, Vec<&'a TaskId>>,
        index: BTreeMap<&'a TaskId, usize>,
        low: BTreeMap<&'a TaskId, usize>,
        on_stack: BTreeSet<&'a TaskId>,
        stack: Vec<&'a TaskId>,
        next: usize,
        out: Vec<Vec<TaskId>>,
    }

    impl<'a> Tarjan<'a> {
        fn visit(&mut self, v: &'a TaskId) {
            self.index.insert(v, self.next);
            self.low.insert(v, self.next);
            self.next += 1;
            self.stack.push(v);
            self.on_stack.insert(v);
            let succs = self.succ.get(v).cloned().unwrap_or_default();
            for w in succs {
                if !self.index.contains_key(w) {
                    self.visit(w);
                    let lw = self.low[w];
                    let lv = self.low.get_mut(v).unwrap();
                    *lv = (*lv).min(lw);
                } else if self.on_stack.contains(w) {
                    let iw = self.index[w];
                    let lv = self.low.get_mut(v).unwrap();
                    *lv = (*lv).min(iw);
                }
            }
            if self.low[v] == self.index[v] {
                let mut comp = Vec::new();
                while let Some(w) = self.stack.pop() {
                    self.on_stack.remove(w);
                    comp.push(w.clone());
                    if w == v {
                        break;
                    }
                }
                let self_loop = comp.len() == 1 && self.succ.get(v).is_some_and(|s| s.contains(&v));
                if comp.len() > 1 || self_loop {
                    comp.sort();
                    self.out.push(comp);
                }
            }
        }
    }

    let mut succ: BTreeMap<&TaskId, Vec<&TaskId>> = BTreeMap::new();
    for (a, b) in &daw.deps {
        succ.entry(a).or_default().push(b);
    }
    let mut t = Tarjan {
        succ,
        index: BTreeMap::new(),
        low: BTreeMap::new(),
        on_stack: BTreeSet::new(),
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    let nodes: BTreeSet<&TaskId> = daw
        .tasks
        .iter()
        .chain(daw.deps.iter().flat_map(|(a, b)| [a, b]))
        .collect();
    for v in nodes {
        if !t.index.contains_key(v) {
            t.visit(v);
        }
    }
    t.out.sort();
    t.out
}

/// State of a single task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskState {
    #[serde(rename = "F")]
    Finished,
    #[serde(rename = "R")]
    Ready,
    #[serde(rename = "O")]
    Open,
}

impl fmt::Display for TaskState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskState::Finished => "F",
            TaskState::Ready => "R",
            TaskState::Open => "O",
        })
    }
}

/// Assignment of a state to every task of a workflow.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DawState {
    pub assignment: BTreeMap<TaskId, TaskState>,
}

impl DawState {
    pub fn get(&self, task: &TaskId) -> Option<TaskState> {
        self.assignment.get(task).copied()
    }

    pub fn tasks_in(&self, state: TaskState) -> BTreeSet<TaskId> {
        self.assignment
            .iter()
            .filter(|(_, s)| **s == state)
            .map(|(t, _)| t.clone())
            .collect()
    }

    pub fn finished(&self) -> BTreeSet<TaskId> {
        self.tasks_in(TaskState::Finished)
    }

    pub fn ready(&self) -> BTreeSet<TaskId> {
        self.tasks_in(TaskState::Ready)
    }

    pub fn all_finished(&self) -> bool {
        self.assignment.values().all(|s| *s == TaskState::Finished)
    }
}

impl fmt::Display for DawState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (t, s)) in self.assignment.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{t}:{s}")?;
        }
        f.write_str("}")
    }
}

/// One transition of an execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Tasks that moved from ready to finished in this step.
    pub finished: BTreeSet<TaskId>,
    /// Wall-clock or simulated seconds since the run started.
    pub time: f64,
    pub nodes: BTreeMap<TaskId, NodeId>,
}

/// A sequence of states from the initial state, with per-step records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub states: Vec<DawState>,
    pub steps: Vec<StepRecord>,
}

impl ExecutionTrace {
    pub fn new(initial: DawState) -> Self {
        ExecutionTrace {
            states: vec![initial],
            steps: Vec::new(),
        }
    }

    pub fn last(&self) -> &DawState {
        self.states.last().expect("trace always holds the initial state")
    }

    /// Whether the trace ends with every task finished.
    pub fn is_complete(&self) -> bool {
        self.last().all_finished()
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }
}

/// Why a trace fails the execution rules.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("trace has no states")]
    Empty,
    #[error("state 0 is not the initial state")]
    NotInitial,
    #[error("state {0} is not valid")]
    InvalidState(usize),
    #[error("transition {0} -> {} breaks the monotonicity rules", .0 + 1)]
    BadTransition(usize),
    #[error("transition {0} -> {} changes no task", .0 + 1)]
    NoChange(usize),
    #[error("step record {0} does not match its states")]
    StepMismatch(usize),
}

/// Checks the execution-trace invariants.
pub fn check_trace(daw: &LogicalDaw, trace: &ExecutionTrace) -> Result<(), TraceError> {
    let first = trace.states.first().ok_or(TraceError::Empty)?;
    if *first != initial_state_unchecked(daw) {
        return Err(TraceError::NotInitial);
    }
    for (i, s) in trace.states.iter().enumerate() {
        if !is_valid_state(daw, s) {
            return Err(TraceError::InvalidState(i));
        }
    }
    for (i, pair) in trace.states.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        if a == b {
            return Err(TraceError::NoChange(i));
        }
        for t in &daw.tasks {
            let ok = matches!(
                (a.get(t), b.get(t)),
                (Some(TaskState::Finished), Some(TaskState::Finished))
                    | (Some(TaskState::Ready), Some(TaskState::Finished | TaskState::Ready))
                    | (Some(TaskState::Open), Some(TaskState::Open | TaskState::Ready))
            );
            if !ok {
                return Err(TraceError::BadTransition(i));
            }
        }
        if let Some(step) = trace.steps.get(i) {
            let moved: BTreeSet<TaskId> = b.finished().difference(&a.finished()).cloned().collect();
            if moved != step.finished {
                return Err(TraceError::StepMismatch(i));
            }
        }
    }
    if trace.steps.len() + 1 != trace.states.len() {
        return Err(TraceError::StepMismatch(trace.steps.len()));
    }
    Ok(())
}

/// Errors of the state and schedule operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DawError {
    #[error("workflow is structurally invalid: {}", join_errors(.0))]
    Structural(Vec<StructuralError>),
    #[error("state is not valid for this workflow")]
    InvalidState,
    #[error("more than {bound} executions; enumeration stopped")]
    BoundExceeded { bound: usize },
    #[error("schedule has no node for task `{0}`")]
    MissingAssignment(TaskId),
    #[error("schedule assigns task `{task}` to unknown node `{node}`")]
    UnknownNode { task: TaskId, node: NodeId },
    #[error("schedule assigns unknown task `{0}`")]
    UnknownTask(TaskId),
}

fn join_errors(errors: &[StructuralError]) -> String {
    errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

fn ensure_structure(daw: &LogicalDaw) -> Result<(), DawError> {
    let errors = validate_structure(daw);
    if errors.is_empty() {
        Ok(())
    } else {
        Err(DawError::Structural(errors))
    }
}

/// The unique valid state with the given finished-set (which must be closed
/// under predecessors and contain the start task).
pub fn state_from_finished(daw: &LogicalDaw, finished: &BTreeSet<TaskId>) -> DawState {
    let preds = daw.predecessor_map();
    state_from_finished_with(daw, &preds, finished)
}

fn state_from_finished_with(
    daw: &LogicalDaw,
    preds: &BTreeMap<TaskId, BTreeSet<TaskId>>,
    finished: &BTreeSet<TaskId>,
) -> DawState {
    let assignment = daw
        .tasks
        .iter()
        .map(|t| {
            let s = if finished.contains(t) {
                TaskState::Finished
            } else if preds.get(t).is_none_or(|p| p.iter().all(|q| finished.contains(q))) {
                TaskState::Ready
            } else {
                TaskState::Open
            };
            (t.clone(), s)
        })
        .collect();
    DawState { assignment }
}

fn initial_state_unchecked(daw: &LogicalDaw) -> DawState {
    state_from_finished(daw, &BTreeSet::from([daw.start.clone()]))
}

/// The initial state: start finished, its direct dependents ready, all else open.
pub fn initial_state(daw: &LogicalDaw) -> Result<DawState, DawError> {
    ensure_structure(daw)?;
    Ok(initial_state_unchecked(daw))
}

/// Whether `state` is a valid state of `daw`.
pub fn is_valid_state(daw: &LogicalDaw, state: &DawState) -> bool {
    if state.assignment.len() != daw.tasks.len()
        || !daw.tasks.iter().all(|t| state.assignment.contains_key(t))
    {
        return false;
    }
    let finished = state.finished();
    if !finished.contains(&daw.start) {
        return false;
    }
    let preds = daw.predecessor_map();
    for t in &finished {
        if !preds[t].iter().all(|p| finished.contains(p)) {
            return false;
        }
    }
    *state == state_from_finished_with(daw, &preds, &finished)
}

/// All successor states reachable by finishing a nonempty subset of the ready tasks.
pub fn next_states(daw: &LogicalDaw, state: &DawState) -> Result<Vec<DawState>, DawError> {
    if !is_valid_state(daw, state) {
        return Err(DawError::InvalidState);
    }
    let preds = daw.predecessor_map();
    Ok(successors_of(daw, &preds, state))
}

fn successors_of(
    daw: &LogicalDaw,
    preds: &BTreeMap<TaskId, BTreeSet<TaskId>>,
    state: &DawState,
) -> Vec<DawState> {
    let ready: Vec<TaskId> = state.ready().into_iter().collect();
    let finished = state.finished();
    assert!(ready.len() < 64, "too many ready tasks to enumerate subsets");
    let mut out = Vec::new();
    for mask in 1u64..(1u64 << ready.len()) {
        let mut next = finished.clone();
        for (i, t) in ready.iter().enumerate() {
            if mask & (1 << i) != 0 {
                next.insert(t.clone());
            }
        }
        out.push(state_from_finished_with(daw, preds, &next));
    }
    out
}

/// Every maximal execution from the initial state to the all-finished state.
///
/// Fails with [`DawError::BoundExceeded`] once more than `max_count` traces exist.
pub fn enumerate_executions(
    daw: &LogicalDaw,
    max_count: usize,
) -> Result<Vec<ExecutionTrace>, DawError> {
    let initial = initial_state(daw)?;
    let preds = daw.predecessor_map();
    let mut out = Vec::new();
    let mut path = vec![initial];
    extend_executions(daw, &preds, &mut path, &mut out, max_count)?;
    Ok(out)
}

fn extend_executions(
    daw: &LogicalDaw,
    preds: &BTreeMap<TaskId, BTreeSet<TaskId>>,
    path: &mut Vec<DawState>,
    out: &mut Vec<ExecutionTrace>,
    max_count: usize,
) -> Result<(), DawError> {
    let current = path.last().expect("path is never empty");
    if current.all_finished() {
        if out.len() >= max_count {
            return Err(DawError::BoundExceeded { bound: max_count });
        }
        let steps = path
            .windows(2)
            .map(|w| StepRecord {
                finished: w[1].finished().difference(&w[0].finished()).cloned().collect(),
                time: 0.0,
                nodes: BTreeMap::new(),
            })
            .collect();
        out.push(ExecutionTrace {
            states: path.clone(),
            steps,
        });
        return Ok(());
    }
    for next in successors_of(daw, preds, current) {
        path.push(next);
        let r = extend_executions(daw, preds, path, out, max_count);
        path.pop();
        r?;
    }
    Ok(())
}

/// Capacities and live status of a compute node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDescriptor {
    pub id: NodeId,
    pub memory_bytes: u64,
    pub cpu_cores: u32,
    pub gpu_count: u32,
    pub disk_free_bytes: u64,
    pub installed_executables: BTreeSet<String>,
    pub present_files: BTreeSet<String>,
    pub alive: bool,
}

impl NodeDescriptor {
    pub fn new(id: impl Into<NodeId>, memory_bytes: u64, cpu_cores: u32) -> Self {
        NodeDescriptor {
            id: id.into(),
            memory_bytes,
            cpu_cores,
            gpu_count: 0,
            disk_free_bytes: u64::MAX / 2,
            installed_executables: BTreeSet::new(),
            present_files: BTreeSet::new(),
            alive: true,
        }
    }

    pub fn capacity(&self) -> ResourceVector {
        ResourceVector {
            memory_bytes: self.memory_bytes,
            cpu_cores: self.cpu_cores,
            gpu_count: self.gpu_count,
            disk_bytes: self.disk_free_bytes,
        }
    }
}

/// A set of compute nodes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub nodes: Vec<NodeDescriptor>,
    /// Licenses available to tasks, by name.
    pub licenses: BTreeSet<String>,
    /// Optional latency in seconds between nodes (simulation only).
    pub network_latency_s: Option<f64>,
}

impl ClusterSpec {
    pub fn new(nodes: Vec<NodeDescriptor>) -> Self {
        ClusterSpec {
            nodes,
            ..ClusterSpec::default()
        }
    }

    pub fn node(&self, id: &NodeId) -> Option<&NodeDescriptor> {
        self.nodes.iter().find(|n| n.id == *id)
    }

    pub fn node_mut(&mut self, id: &NodeId) -> Option<&mut NodeDescriptor> {
        self.nodes.iter_mut().find(|n| n.id == *id)
    }

    /// Node ids that occur more than once, and the empty-cluster condition.
    pub fn validate(&self) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("cluster has no nodes".into());
        }
        let mut seen = BTreeSet::new();
        for n in &self.nodes {
            if !seen.insert(&n.id) {
                return Err(format!("duplicate node id `{}`", n.id));
            }
        }
        Ok(())
    }
}

/// A total map from tasks to nodes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule {
    pub assignment: BTreeMap<TaskId, NodeId>,
}

impl Schedule {
    pub fn node_of(&self, task: &TaskId) -> Option<&NodeId> {
        self.assignment.get(task)
    }

    /// Every task on `node`.
    pub fn uniform(daw: &LogicalDaw, node: &NodeId) -> Schedule {
        Schedule {
            assignment: daw.tasks.iter().map(|t| (t.clone(), node.clone())).collect(),
        }
    }
}

/// A logical workflow bound to a cluster through a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalDaw {
    pub daw: LogicalDaw,
    pub cluster: ClusterSpec,
    pub schedule: Schedule,
}

impl PhysicalDaw {
    pub fn node_of(&self, task: &TaskId) -> &NodeId {
        &self.schedule.assignment[task]
    }
}

/// Binds each task of `daw` to its node.
pub fn apply_schedule(
    daw: &LogicalDaw,
    cluster: &ClusterSpec,
    schedule: &Schedule,
) -> Result<PhysicalDaw, DawError> {
    for task in &daw.tasks {
        let node = schedule
            .node_of(task)
            .ok_or_else(|| DawError::MissingAssignment(task.clone()))?;
        if cluster.node(node).is_none() {
            return Err(DawError::UnknownNode {
                task: task.clone(),
                node: node.clone(),
            });
        }
    }
    if let Some(extra) = schedule.assignment.keys().find(|t| !daw.tasks.contains(*t)) {
        return Err(DawError::UnknownTask(extra.clone()));
    }
    Ok(PhysicalDaw {
        daw: daw.clone(),
        cluster: cluster.clone(),
        schedule: schedule.clone(),
    })
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn chain() -> LogicalDaw {
        LogicalDaw::from_edges("ts", "te", &[("ts", "a", "x"), ("a", "te", "y")])
    }

    pub fn diamond() -> LogicalDaw {
        LogicalDaw::from_edges(
            "ts",
            "te",
            &[
                ("ts", "a", "in_a"),
                ("ts", "b", "in_b"),
                ("a", "c", "ac"),
                ("b", "c", "bc"),
                ("c", "te", "out"),
            ],
        )
    }

    pub fn independent(k: usize) -> LogicalDaw {
        let names: Vec<String> = (0..k).map(|i| format!("t{i}")).collect();
        let mut edges = Vec::new();
        for n in &names {
            edges.push(("ts".to_string(), n.clone(), format!("in_{n}")));
            edges.push((n.clone(), "te".to_string(), format!("out_{n}")));
        }
        let refs: Vec<(&str, &str, &str)> = edges
            .iter()
            .map(|(a, b, c)| (a.as_str(), b.as_str(), c.as_str()))
            .collect();
        LogicalDaw::from_edges("ts", "te", &refs)
    }

    pub fn state(pairs: &[(&str, TaskState)]) -> DawState {
        DawState {
            assignment: pairs.iter().map(|(t, s)| (TaskId::new(*t), *s)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::TaskState::{Finished as F, Open as O, Ready as R};
    use super::*;

    #[test]
    fn chain_is_well_formed() {
        assert!(validate_structure(&chain()).is_empty());
    }

    #[test]
    fn end_with_outgoing_edge_is_rejected() {
        let daw = LogicalDaw::from_edges(
            "ts",
            "te",
            &[("ts", "a", "x"), ("a", "te", "y"), ("te", "a", "z")],
        );
        let errors = validate_structure(&daw);
        assert!(errors.contains(&StructuralError::EndHasOutgoing { to: "a".into() }));
    }

    #[test]
    fn two_cycle_is_reported() {
        let daw = LogicalDaw::from_edges(
            "ts",
            "te",
            &[("ts", "a", "x"), ("a", "b", "p"), ("b", "a", "q"), ("b", "te", "y")],
        );
        let errors = validate_structure(&daw);
        assert!(errors.contains(&StructuralError::Cycle {
            tasks: vec!["a".into(), "b".into()]
        }));
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let daw = LogicalDaw::from_edges(
            "ts",
            "te",
            &[("ts", "a", "x"), ("a", "a", "l"), ("a", "te", "y")],
        );
        assert!(validate_structure(&daw)
            .iter()
            .any(|e| matches!(e, StructuralError::Cycle { tasks } if tasks == &vec![TaskId::from("a")])));
    }

    #[test]
    fn unreachable_and_unlabeled() {
        let mut daw = chain();
        daw.tasks.insert("orphan".into());
        daw.deps.insert(("orphan".into(), "te".into()));
        daw.labels.insert(("orphan".into(), "te".into()), "o".into());
        daw.deps.insert(("ts".into(), "te".into()));
        let errors = validate_structure(&daw);
        assert!(errors.contains(&StructuralError::MultipleSources { task: "orphan".into() }));
        assert!(errors.contains(&StructuralError::UnlabeledDep {
            from: "ts".into(),
            to: "te".into()
        }));

        let mut dead_end = chain();
        dead_end.tasks.insert("sink".into());
        dead_end.deps.insert(("a".into(), "sink".into()));
        dead_end.labels.insert(("a".into(), "sink".into()), "s".into());
        assert!(validate_structure(&dead_end)
            .contains(&StructuralError::CannotReachEnd { task: "sink".into() }));
    }

    #[test]
    fn initial_states() {
        assert_eq!(
            initial_state(&chain()).unwrap(),
            state(&[("ts", F), ("a", R), ("te", O)])
        );
        assert_eq!(
            initial_state(&diamond()).unwrap(),
            state(&[("ts", F), ("a", R), ("b", R), ("c", O), ("te", O)])
        );
        let single = LogicalDaw::from_edges("ts", "te", &[("ts", "te", "x")]);
        assert_eq!(initial_state(&single).unwrap(), state(&[("ts", F), ("te", R)]));
    }

    #[test]
    fn initial_state_rejects_bad_structure() {
        let daw = LogicalDaw::from_edges("ts", "te", &[("ts", "a", "x"), ("a", "ts", "y")]);
        assert!(matches!(initial_state(&daw), Err(DawError::Structural(_))));
    }

    #[test]
    fn validity_examples() {
        let d = diamond();
        assert!(is_valid_state(&d, &initial_state(&d).unwrap()));
        assert!(!is_valid_state(
            &d,
            &state(&[("ts", F), ("a", O), ("b", O), ("c", R), ("te", O)])
        ));
        assert!(!is_valid_state(
            &d,
            &state(&[("ts", F), ("a", F), ("b", F), ("c", O), ("te", O)])
        ));
    }

    #[test]
    fn finished_set_must_be_downward_closed() {
        let d = chain();
        assert!(!is_valid_state(&d, &state(&[("ts", F), ("a", R), ("te", F)])));
        assert!(!is_valid_state(&d, &state(&[("ts", R), ("a", O), ("te", O)])));
        assert!(!is_valid_state(&d, &state(&[("ts", F), ("a", R)])));
    }

    #[test]
    fn successor_counts() {
        let d = diamond();
        let s0 = initial_state(&d).unwrap();
        assert_eq!(next_states(&d, &s0).unwrap().len(), 3);
        let c = chain();
        assert_eq!(next_states(&c, &initial_state(&c).unwrap()).unwrap().len(), 1);
        let done = state(&[("ts", F), ("a", F), ("te", F)]);
        assert!(next_states(&c, &done).unwrap().is_empty());
        assert_eq!(
            next_states(&c, &state(&[("ts", F), ("a", F), ("te", O)])),
            Err(DawError::InvalidState)
        );
    }

    #[test]
    fn execution_counts() {
        assert_eq!(enumerate_executions(&chain(), 100).unwrap().len(), 1);
        assert_eq!(enumerate_executions(&diamond(), 100).unwrap().len(), 3);
        assert_eq!(enumerate_executions(&independent(3), 100).unwrap().len(), 13);
        assert_eq!(
            enumerate_executions(&independent(3), 5),
            Err(DawError::BoundExceeded { bound: 5 })
        );
    }

    #[test]
    fn enumerated_traces_obey_rules() {
        let d = diamond();
        for trace in enumerate_executions(&d, 100).unwrap() {
            check_trace(&d, &trace).unwrap();
            assert!(trace.is_complete());
        }
    }

    #[test]
    fn schedule_binding() {
        let daw = chain();
        let cluster = ClusterSpec::new(vec![NodeDescriptor::new("n1", 1 << 30, 1)]);
        let sched = Schedule::uniform(&daw, &"n1".into());
        let phys = apply_schedule(&daw, &cluster, &sched).unwrap();
        assert!(daw.tasks.iter().all(|t| phys.node_of(t).as_str() == "n1"));

        let mut missing = sched.clone();
        missing.assignment.remove(&TaskId::from("a"));
        assert_eq!(
            apply_schedule(&daw, &cluster, &missing),
            Err(DawError::MissingAssignment("a".into()))
        );

        let mut unknown = sched;
        unknown.assignment.insert("a".into(), "n9".into());
        assert!(matches!(
            apply_schedule(&daw, &cluster, &unknown),
            Err(DawError::UnknownNode { .. })
        ));
    }
}
