//! The single owner of workflow state during a run.

use std::collections::{BTreeMap, BTreeSet};

use super::backend::{Backend, Completion, Launch};
use super::config::{EngineConfig, Mode};
use super::observe::{observe, CheckCtx};
use super::plan::{alternative_node, plan, plan_lenient};
use super::record::{
    AttemptOutcome, AttemptRecord, CheckOutcome, EngineEvent, EventKind, FileFacts, RejectedDispatch, RunRecord,
    RunStatus,
};
use super::recovery::choose_recovery;
use super::RunOutcome;
use crate::constraint::{
    check_setup, evaluate_dynamic, evaluate_static, instantiate_catalog, CatalogName, CatalogParams, CheckPoint, CheckTime, Component,
    Direction, Evaluation, NodeSel, Phase, PropertyEnvironment, PropertyName, RecoveryAction, RecoveryRecord,
    Recoverable, Scope, Status, Target, ValidityConstraint, Verdict, ViolationReport,
};
use crate::daw::{initial_state, state_from_finished, ClusterSpec, ExecutionTrace, ResourceVector, Schedule, StepRecord};
use crate::ids::{LabelId, NodeId, TaskId};
use crate::lang::Desugared;
use crate::sim::{inject, FaultEvent, FaultScript, SimClock};
use crate::value::Value;

const COMPLETION_RANK: u8 = 0;
const TIMER_RANK: u8 = 2;
const HEARTBEAT_RANK: u8 = 3;

#[derive(Debug, Clone)]
enum Ev {
    Complete { task: TaskId, attempt: u32, exit_code: i64, peak: u64 },
    Fault(FaultEvent),
    Timeout { task: TaskId, attempt: u32 },
    Poll { task: TaskId, attempt: u32 },
    RetryReady { task: TaskId },
    Heartbeat,
}

struct Running {
    attempt: u32,
    node: NodeId,
    start: f64,
    reserved: ResourceVector,
}

pub(crate) struct Coordinator<'a, B: Backend> {
    wf: &'a Desugared,
    config: &'a EngineConfig,
    cluster: ClusterSpec,
    schedule: Schedule,
    backend: B,
    clock: SimClock<Ev>,
    finished: BTreeSet<TaskId>,
    trace: ExecutionTrace,
    pending_step: BTreeMap<TaskId, NodeId>,
    running: BTreeMap<TaskId, Running>,
    backing_off: BTreeSet<TaskId>,
    dispatches: BTreeMap<TaskId, u32>,
    retries: BTreeMap<TaskId, u32>,
    rescheduled: BTreeSet<TaskId>,
    reserved: BTreeMap<NodeId, ResourceVector>,
    waiting_logged: BTreeSet<TaskId>,
    records: RunRecord,
    reports: Vec<ViolationReport>,
    events: Vec<EngineEvent>,
    down_since: BTreeMap<NodeId, f64>,
    declared_dead: BTreeSet<NodeId>,
    /// Reports to mark recovered once their task succeeds.
    unresolved: BTreeMap<TaskId, Vec<usize>>,
    status: Option<RunStatus>,
    /// Stop after static checks and planning.
    setup_only: bool,
}

impl<'a, B: Backend> Coordinator<'a, B> {
    pub(crate) fn new(wf: &'a Desugared, cluster: &ClusterSpec, config: &'a EngineConfig, backend: B) -> Self {
        Coordinator {
            wf,
            config,
            cluster: cluster.clone(),
            schedule: Schedule::default(),
            backend,
            clock: SimClock::new(),
            finished: BTreeSet::new(),
            trace: ExecutionTrace::new(initial_state(&wf.daw).expect("desugared workflows are well-formed")),
            pending_step: BTreeMap::new(),
            running: BTreeMap::new(),
            backing_off: BTreeSet::new(),
            dispatches: BTreeMap::new(),
            retries: BTreeMap::new(),
            rescheduled: BTreeSet::new(),
            reserved: BTreeMap::new(),
            waiting_logged: BTreeSet::new(),
            records: RunRecord::default(),
            reports: Vec::new(),
            events: Vec::new(),
            down_since: BTreeMap::new(),
            declared_dead: BTreeSet::new(),
            unresolved: BTreeMap::new(),
            status: None,
            setup_only: false,
        }
    }

    pub(crate) fn setup_only(mut self) -> Self {
        self.setup_only = true;
        self
    }

    fn now(&self) -> f64 {
        self.clock.now()
    }

    fn event(&mut self, component: Component, kind: EventKind, task: Option<&TaskId>, node: Option<&NodeId>, attempt: Option<u32>, detail: Option<String>) {
        let e = EngineEvent {
            timestamp: self.now(),
            component,
            kind,
            task: task.cloned(),
            node: node.cloned(),
            attempt,
            detail,
        };
        log::debug!("{:?}", e);
        self.events.push(e);
    }

    pub(crate) fn run(mut self, schedule: Option<Schedule>, faults: &FaultScript) -> RunOutcome {
        let daw = &self.wf.daw;
        self.finished.insert(daw.start.clone());

        if self.config.static_checks {
            let env = self.backend.static_env(self.wf, &self.cluster);
            let verdict = check_setup(daw, &self.cluster, &self.wf.static_vcs, &env);
            for vc in &self.wf.static_vcs {
                let e = evaluate_static(vc, daw, &self.cluster, &env);
                self.records.static_checks.push(CheckOutcome {
                    constraint: vc.id.clone(),
                    time: CheckTime::Before,
                    status: e.status,
                    observed: e.observed,
                    timestamp: 0.0,
                });
            }
            let correct = verdict.is_correct();
            self.event(
                Component::S,
                EventKind::StaticCheck,
                None,
                None,
                None,
                Some(format!("{} static constraints, {} failed", self.wf.static_vcs.len(), verdict.reports.len())),
            );
            self.reports.extend(verdict.reports);
            if !correct {
                self.status = Some(RunStatus::AbortedStatic);
                return self.finish();
            }
        }

        let planned = match schedule {
            Some(s) => Ok(s),
            None if self.config.static_checks => plan(daw, &self.cluster, self.config.scheduler),
            None => plan_lenient(daw, &self.cluster, self.config.scheduler),
        };
        match planned {
            Ok(s) => self.schedule = s,
            Err(e) => {
                self.event(Component::S, EventKind::Planned, None, None, None, Some(e.to_string()));
                self.status = Some(RunStatus::PlanningFailed { reason: e.to_string() });
                return self.finish();
            }
        }
        let summary = self
            .schedule
            .assignment
            .iter()
            .filter(|(t, _)| **t != daw.start && **t != daw.end)
            .map(|(t, n)| format!("{t}@{n}"))
            .collect::<Vec<_>>()
            .join(" ");
        self.event(Component::S, EventKind::Planned, None, None, None, Some(summary));
        if self.setup_only {
            return self.finish();
        }

        inject(faults, &mut self.clock, Ev::Fault);
        if self.backend.mode() == Mode::Simulated {
            self.clock.schedule(self.config.heartbeat_interval_s, HEARTBEAT_RANK, Ev::Heartbeat);
        }
        self.main_loop();
        self.finish()
    }

    fn main_loop(&mut self) {
        loop {
            self.dispatch();
            if self.status.is_some() {
                return;
            }
            if self.finished.contains(&self.wf.daw.end) {
                self.status = Some(RunStatus::Correct);
                return;
            }
            if !self.progress_possible() {
                let task = self.blocked_task();
                self.event(Component::EE, EventKind::Abort, Some(&task), None, None, Some("no live node can run the remaining tasks".into()));
                self.status = Some(RunStatus::TaskFailed { task });
                self.cancel_running();
                return;
            }
            let next = self.clock.peek_time();
            if self.backend.mode() == Mode::Real {
                let completion = self.backend.wait(next);
                if let Some(now) = self.backend.wall_now() {
                    self.clock.advance_to(now);
                }
                if let Some(c) = completion {
                    self.on_real_completion(c);
                    self.flush_step();
                    continue;
                }
                let now = self.now();
                while self.clock.peek_time().is_some_and(|t| t <= now) {
                    let (_, ev) = self.clock.pop().unwrap();
                    self.clock.advance_to(now);
                    self.handle(ev);
                    if self.status.is_some() {
                        return;
                    }
                }
            } else {
                let Some(t) = next else { return };
                while self.clock.peek_time() == Some(t) {
                    let (_, ev) = self.clock.pop().unwrap();
                    self.handle(ev);
                    if self.status.is_some() {
                        return;
                    }
                }
            }
            self.flush_step();
        }
    }

    fn progress_possible(&self) -> bool {
        !self.running.is_empty()
            || self.clock.iter().any(|e| !matches!(e, Ev::Heartbeat))
            || self.down_since.keys().any(|n| !self.declared_dead.contains(n))
            || self.ready_tasks().iter().any(|t| self.node_alive(&self.schedule.assignment[t]))
    }

    fn blocked_task(&self) -> TaskId {
        self.ready_tasks().into_iter().next().unwrap_or_else(|| self.wf.daw.end.clone())
    }

    fn node_alive(&self, n: &NodeId) -> bool {
        self.cluster.node(n).is_some_and(|d| d.alive)
    }

    fn ready_tasks(&self) -> Vec<TaskId> {
        let daw = &self.wf.daw;
        daw.tasks
            .iter()
            .filter(|t| !self.finished.contains(*t) && !self.running.contains_key(*t) && !self.backing_off.contains(*t))
            .filter(|t| daw.predecessors(t).all(|p| self.finished.contains(p)))
            .cloned()
            .collect()
    }

    fn flush_step(&mut self) {
        if self.pending_step.is_empty() {
            return;
        }
        let nodes = std::mem::take(&mut self.pending_step);
        let state = state_from_finished(&self.wf.daw, &self.finished);
        self.trace.states.push(state);
        let finished: BTreeSet<TaskId> = nodes.keys().cloned().collect();
        let detail = finished.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(" ");
        self.trace.steps.push(StepRecord {
            finished,
            time: self.now(),
            nodes,
        });
        let step = self.trace.steps.len();
        self.event(Component::EE, EventKind::Step, None, None, None, Some(format!("step {step}: {detail}")));
        debug_assert!(crate::daw::is_valid_state(&self.wf.daw, self.trace.last()));
    }

    fn dispatch(&mut self) {
        for t in self.ready_tasks() {
            if self.status.is_some() {
                return;
            }
            let daw = &self.wf.daw;
            if t == daw.end {
                // The end task only becomes ready once everything else finished.
                self.flush_step();
                let node = self.schedule.assignment.get(&t).cloned().unwrap_or_else(|| self.cluster.nodes[0].id.clone());
                self.finished.insert(t.clone());
                self.pending_step.insert(t, node);
                self.flush_step();
                return;
            }
            if self.running.len() >= self.config.max_parallel_tasks {
                return;
            }
            let node = self.schedule.assignment[&t].clone();
            if !self.node_alive(&node) {
                continue;
            }
            let request = daw.task_def(&t).map(|d| d.resource_request.clone()).unwrap_or_default();
            let capacity = self.cluster.node(&node).map(|n| n.capacity()).unwrap_or_default();
            let in_use = self.reserved.get(&node).cloned().unwrap_or_default();
            if request.exceeds(&capacity).is_none() && request.exceeds(&capacity.saturating_sub(&in_use)).is_some() {
                if self.waiting_logged.insert(t.clone()) {
                    self.event(Component::RM, EventKind::AdmissionWait, Some(&t), Some(&node), None, Some("waiting for free capacity".into()));
                }
                continue;
            }
            self.waiting_logged.remove(&t);
            self.try_dispatch(&t, &node, request);
        }
    }

    fn scope_for(&self, t: &TaskId, node: &NodeId) -> Scope {
        let daw = &self.wf.daw;
        Scope {
            step_index: self.trace.steps.len() + 1,
            executed: [t.clone()].into(),
            incoming: daw.incoming(t),
            outgoing: daw.outgoing(t),
            node_of: [(t.clone(), node.clone())].into(),
        }
    }

    /// Evaluates the task's constraints due at `time`.
    #[allow(clippy::too_many_arguments)]
    fn check(
        &mut self,
        t: &TaskId,
        node: &NodeId,
        attempt: u32,
        time: CheckTime,
        phase: Phase,
        start: Option<f64>,
        exit_code: Option<i64>,
    ) -> (Vec<CheckOutcome>, Vec<ViolationReport>) {
        let wf = self.wf;
        let vcs: Vec<&ValidityConstraint> = wf
            .dynamic_vcs
            .get(t)
            .into_iter()
            .flatten()
            .filter(|vc| vc.metadata.checks_at(time))
            .collect();
        if vcs.is_empty() {
            return (Vec::new(), Vec::new());
        }
        let now = self.now();
        let mut env = PropertyEnvironment::new(&self.cluster);
        env.set_phase(t, phase);
        for n in &self.cluster.nodes {
            env.set_node(&n.id, PropertyName::HeartbeatAgeSeconds, Value::Decimal(self.heartbeat_age(&n.id)));
        }
        let def = wf.daw.task_def(t).expect("every task has a definition");
        let ctx = CheckCtx {
            daw: &wf.daw,
            cluster: &self.cluster,
            task: def,
            node,
            attempt,
            time,
            now,
            start,
            exit_code,
        };
        observe(&mut self.backend, &ctx, &vcs, &mut env);
        let scope = self.scope_for(t, node);
        let step = scope.step_index;
        let mut outcomes = Vec::new();
        let mut reports = Vec::new();
        for vc in vcs {
            let e = evaluate_dynamic(vc, &scope, &env);
            if e.status == Status::NotApplicable {
                continue;
            }
            outcomes.push(CheckOutcome {
                constraint: vc.id.clone(),
                time,
                status: e.status,
                observed: e.observed.clone(),
                timestamp: now,
            });
            if let Some(mut r) = ViolationReport::from_evaluation(vc, &e, CheckPoint::Step(step), Some(time), now) {
                r.attempt = Some(attempt);
                if r.node.is_none() {
                    r.node = Some(node.clone());
                }
                reports.push(r);
            }
        }
        (outcomes, reports)
    }

    fn heartbeat_age(&self, n: &NodeId) -> f64 {
        let interval = self.config.heartbeat_interval_s;
        let last = match self.down_since.get(n) {
            Some(since) => (since / interval).floor() * interval,
            None => (self.now() / interval).floor() * interval,
        };
        (self.now() - last).max(0.0)
    }

    fn label_facts(&mut self, t: &TaskId, node: &NodeId, attempt: u32, time: CheckTime, dir: Direction, start: Option<f64>, exit_code: Option<i64>) -> BTreeMap<LabelId, FileFacts> {
        let wf = self.wf;
        let def = wf.daw.task_def(t).expect("every task has a definition");
        let labels = match dir {
            Direction::Incoming => &def.inputs,
            Direction::Outgoing => &def.outputs,
        };
        let ctx = CheckCtx {
            daw: &wf.daw,
            cluster: &self.cluster,
            task: def,
            node,
            attempt,
            time,
            now: self.clock.now(),
            start,
            exit_code,
        };
        labels
            .iter()
            .filter_map(|l| self.backend.label(&ctx, dir, l).map(|f| (l.clone(), f)))
            .collect()
    }

    /// Files soft reports and returns the indices of fatal ones.
    fn file_reports(&mut self, reports: Vec<ViolationReport>) -> Vec<usize> {
        let mut fatal = Vec::new();
        for r in reports {
            if r.is_fatal() {
                fatal.push(self.reports.len());
            } else {
                self.event(Component::EE, EventKind::Warning, r.task.as_ref(), r.node.as_ref(), r.attempt, Some(format!("{} warned: {}", r.constraint, r.formula)));
            }
            self.reports.push(r);
        }
        fatal
    }

    fn try_dispatch(&mut self, t: &TaskId, node: &NodeId, request: ResourceVector) {
        let attempt = {
            let n = self.dispatches.entry(t.clone()).or_default();
            *n += 1;
            *n
        };
        let def = self.wf.daw.task_def(t).expect("every task has a definition").clone();
        self.event(Component::EE, EventKind::Dispatch, Some(t), Some(node), Some(attempt), None);
        let dir = match self.backend.prepare(&def, attempt, node) {
            Ok(d) => d,
            Err(e) => {
                self.event(Component::EE, EventKind::TaskFailed, Some(t), Some(node), Some(attempt), Some(e.clone()));
                self.task_failure(t, node, e);
                return;
            }
        };
        let (checks, reports) = self.check(t, node, attempt, CheckTime::Before, Phase::Dispatched, None, None);
        let inputs = self.label_facts(t, node, attempt, CheckTime::Before, Direction::Incoming, None, None);
        let fatal = self.file_reports(reports);
        if !fatal.is_empty() {
            let ids = fatal.iter().map(|i| self.reports[*i].constraint.clone()).collect::<Vec<_>>().join(", ");
            self.records.rejected_dispatches.push(RejectedDispatch {
                task: t.clone(),
                attempt,
                node: node.clone(),
                time: self.now(),
                dir,
                checks,
                inputs,
            });
            self.event(Component::EE, EventKind::BeforeCheckFailed, Some(t), Some(node), Some(attempt), Some(ids));
            self.violation(t, node, fatal);
            return;
        }

        let now = self.now();
        let (stdout, stderr) = self.backend.log_paths(t, attempt);
        self.records.attempts.entry(t.clone()).or_default().push(AttemptRecord {
            attempt,
            node: node.clone(),
            start: now,
            end: None,
            outcome: None,
            exit_code: None,
            dir,
            stdout,
            stderr,
            peak_memory_bytes: None,
            checks,
            inputs,
            outputs: BTreeMap::new(),
        });
        let r = self.reserved.entry(node.clone()).or_default();
        *r = r.add(&request);
        self.running.insert(
            t.clone(),
            Running {
                attempt,
                node: node.clone(),
                start: now,
                reserved: request,
            },
        );
        match self.backend.launch(&def, attempt, node, now) {
            Launch::At { finish_at, exit_code, peak_memory } => {
                self.clock.schedule(
                    finish_at,
                    COMPLETION_RANK,
                    Ev::Complete {
                        task: t.clone(),
                        attempt,
                        exit_code,
                        peak: peak_memory,
                    },
                );
            }
            Launch::Spawned => {}
            Launch::Failed(msg) => {
                self.event(Component::EE, EventKind::SpawnFailed, Some(t), Some(node), Some(attempt), Some(msg.clone()));
                self.end_attempt(t, AttemptOutcome::SpawnFailed, None, None);
                let idx = self.spawn_failure_report(t, node, attempt, msg);
                self.violation(t, node, vec![idx]);
                return;
            }
        }
        self.event(Component::EE, EventKind::Launch, Some(t), Some(node), Some(attempt), def.command.clone());
        if let Some(limit) = def.max_runtime {
            self.clock.schedule(now + limit, TIMER_RANK, Ev::Timeout { task: t.clone(), attempt });
        }
        let polled = self
            .wf
            .dynamic_vcs
            .get(t)
            .is_some_and(|v| v.iter().any(|vc| vc.metadata.checks_at(CheckTime::During)));
        if polled {
            self.clock.schedule(now + self.config.poll_interval_s, TIMER_RANK, Ev::Poll { task: t.clone(), attempt });
        }
    }

    /// A spawn failure reported against the task's executable constraint.
    fn spawn_failure_report(&mut self, t: &TaskId, node: &NodeId, attempt: u32, msg: String) -> usize {
        let vc = self
            .wf
            .dynamic_vcs
            .get(t)
            .and_then(|v| v.iter().find(|vc| vc.entry == CatalogName::TaskExecutableMustExist))
            .cloned()
            .unwrap_or_else(|| {
                instantiate_catalog(
                    CatalogName::TaskExecutableMustExist,
                    CatalogParams {
                        id: Some(format!("{t}/executable")),
                        ..CatalogParams::for_task(t.clone())
                    },
                )
                .expect("catalog defaults are valid")
            });
        let mut e = evaluation(Status::Violated, Some(Value::Bool(false)));
        e.task = Some(t.clone());
        e.node = Some(node.clone());
        e.detail = Some(msg);
        let mut r = ViolationReport::from_evaluation(&vc, &e, CheckPoint::Step(self.trace.steps.len() + 1), Some(CheckTime::Before), self.now())
            .expect("a violated evaluation yields a report");
        r.attempt = Some(attempt);
        self.reports.push(r);
        self.reports.len() - 1
    }

    fn end_attempt(&mut self, t: &TaskId, outcome: AttemptOutcome, exit_code: Option<i64>, peak: Option<u64>) -> Option<Running> {
        let run = self.running.remove(t)?;
        if let Some(r) = self.reserved.get_mut(&run.node) {
            *r = r.saturating_sub(&run.reserved);
        }
        let now = self.now();
        if let Some(rec) = self.records.attempts.get_mut(t).and_then(|a| a.last_mut()) {
            rec.end = Some(now);
            rec.outcome = Some(outcome);
            rec.exit_code = exit_code;
            if peak.is_some() {
                rec.peak_memory_bytes = peak;
            }
        }
        Some(run)
    }

    fn handle(&mut self, ev: Ev) {
        match ev {
            Ev::Complete { task, attempt, exit_code, peak } => self.on_complete(&task, attempt, Some(exit_code), Some(peak)),
            Ev::Fault(f) => self.on_fault(f),
            Ev::Timeout { task, attempt } => self.on_poll(&task, attempt, true),
            Ev::Poll { task, attempt } => self.on_poll(&task, attempt, false),
            Ev::RetryReady { task } => {
                self.backing_off.remove(&task);
            }
            Ev::Heartbeat => self.on_heartbeat(),
        }
    }

    fn on_real_completion(&mut self, c: Completion) {
        self.on_complete(&c.task, c.attempt, c.exit_code, c.peak_memory);
    }

    fn on_complete(&mut self, t: &TaskId, attempt: u32, exit_code: Option<i64>, peak: Option<u64>) {
        if self.running.get(t).is_none_or(|r| r.attempt != attempt) {
            return;
        }
        let run = self.end_attempt(t, AttemptOutcome::Completed, exit_code, peak).expect("checked above");
        let node = run.node.clone();
        self.event(Component::EE, EventKind::Exit, Some(t), Some(&node), Some(attempt), Some(format!("exit code {}", exit_code.map(|c| c.to_string()).unwrap_or_else(|| "none".into()))));

        let (checks, reports) = self.check(t, &node, attempt, CheckTime::After, Phase::Completed, Some(run.start), exit_code);
        let outputs = self.label_facts(t, &node, attempt, CheckTime::After, Direction::Outgoing, Some(run.start), exit_code);
        if let Some(rec) = self.records.attempts.get_mut(t).and_then(|a| a.last_mut()) {
            rec.checks.extend(checks);
            rec.outputs = outputs;
        }
        let fatal = self.file_reports(reports);
        if !fatal.is_empty() {
            let ids = fatal.iter().map(|i| self.reports[*i].constraint.clone()).collect::<Vec<_>>().join(", ");
            self.event(Component::EE, EventKind::AfterCheckFailed, Some(t), Some(&node), Some(attempt), Some(ids));
            self.violation(t, &node, fatal);
            return;
        }
        if exit_code != Some(0) {
            let why = match exit_code {
                Some(c) => format!("exit code {c}"),
                None => "terminated by a signal".to_string(),
            };
            self.event(Component::EE, EventKind::TaskFailed, Some(t), Some(&node), Some(attempt), Some(why.clone()));
            self.task_failure(t, &node, why);
            return;
        }
        let def = self.wf.daw.task_def(t).expect("every task has a definition").clone();
        if let Err(e) = self.backend.collect(&def, attempt) {
            self.event(Component::EE, EventKind::TaskFailed, Some(t), Some(&node), Some(attempt), Some(e.clone()));
            self.task_failure(t, &node, e);
            return;
        }
        for i in self.unresolved.remove(t).unwrap_or_default() {
            let r = &mut self.reports[i];
            if r.verdict == Verdict::Violated {
                r.verdict = Verdict::Recovered;
                if let Some(last) = r.recovery.last_mut() {
                    last.outcome = format!("{}; task succeeded on attempt {attempt}", last.outcome);
                }
            }
        }
        self.finished.insert(t.clone());
        self.pending_step.insert(t.clone(), node);
    }

    fn on_poll(&mut self, t: &TaskId, attempt: u32, is_timeout: bool) {
        let Some(run) = self.running.get(t).filter(|r| r.attempt == attempt) else { return };
        let (node, start) = (run.node.clone(), run.start);
        if let Some(peak) = self.backend.sample_memory(t, attempt) {
            if let Some(rec) = self.records.attempts.get_mut(t).and_then(|a| a.last_mut()) {
                rec.peak_memory_bytes = Some(rec.peak_memory_bytes.unwrap_or(0).max(peak));
            }
        }
        let (checks, reports) = self.check(t, &node, attempt, CheckTime::During, Phase::Launched, Some(start), None);
        if let Some(rec) = self.records.attempts.get_mut(t).and_then(|a| a.last_mut()) {
            rec.checks.extend(checks);
        }
        let fatal = self.file_reports(reports);
        if !fatal.is_empty() {
            let ids = fatal.iter().map(|i| self.reports[*i].constraint.clone()).collect::<Vec<_>>().join(", ");
            self.event(Component::M, EventKind::DuringCheckFailed, Some(t), Some(&node), Some(attempt), Some(ids));
            self.backend.kill(t, attempt);
            self.end_attempt(t, AttemptOutcome::Killed, None, None);
            let why = if is_timeout { "runtime limit reached" } else { "during-check failed" };
            self.event(Component::EE, EventKind::Kill, Some(t), Some(&node), Some(attempt), Some(why.into()));
            self.violation(t, &node, fatal);
            return;
        }
        if !is_timeout {
            self.clock.schedule(self.now() + self.config.poll_interval_s, TIMER_RANK, Ev::Poll { task: t.clone(), attempt });
        }
    }

    /// Applies the recovery ladder to hard failures of `t`'s constraints.
    fn violation(&mut self, t: &TaskId, node: &NodeId, fatal: Vec<usize>) {
        let unevaluable = fatal.iter().any(|i| self.reports[*i].verdict == Verdict::Unevaluable);
        let recoverable = if unevaluable {
            Recoverable::No
        } else {
            fatal
                .iter()
                .map(|i| self.reports[*i].metadata.recoverable)
                .min_by_key(|r| match r {
                    Recoverable::No => 0,
                    Recoverable::Maybe => 1,
                    Recoverable::Yes => 2,
                })
                .unwrap_or(Recoverable::No)
        };
        let (action, outcome) = self.recover(t, node, recoverable);
        for i in &fatal {
            self.reports[*i].recovery.push(RecoveryRecord {
                action,
                outcome: outcome.clone(),
            });
        }
        if action == RecoveryAction::AbortWorkflow {
            self.abort_dynamic(t, node);
        } else {
            self.unresolved.entry(t.clone()).or_default().extend(fatal);
        }
    }

    fn task_failure(&mut self, t: &TaskId, node: &NodeId, why: String) {
        let (action, outcome) = self.recover(t, node, Recoverable::Maybe);
        log::info!("task `{t}` failed ({why}): {outcome}");
        if action == RecoveryAction::AbortWorkflow {
            self.cancel_running();
            self.flush_step();
            self.status = Some(RunStatus::TaskFailed { task: t.clone() });
        }
    }

    /// Chooses and performs the next rung of the recovery ladder.
    fn recover(&mut self, t: &TaskId, node: &NodeId, recoverable: Recoverable) -> (RecoveryAction, String) {
        let used = self.retries.get(t).copied().unwrap_or(0);
        let alternative = alternative_node(&self.wf.daw, &self.cluster, t, node);
        let action = choose_recovery(
            recoverable,
            used,
            &self.config.retry,
            self.rescheduled.contains(t),
            alternative.is_some(),
        );
        let outcome = match action {
            RecoveryAction::RetrySameNode => {
                let n = used + 1;
                self.retries.insert(t.clone(), n);
                let delay = self.config.retry.backoff(n);
                self.backing_off.insert(t.clone());
                self.clock.schedule(self.now() + delay, TIMER_RANK, Ev::RetryReady { task: t.clone() });
                let msg = format!("retry {n} on `{node}` after {delay} s");
                self.event(Component::EE, EventKind::Retry, Some(t), Some(node), None, Some(msg.clone()));
                msg
            }
            RecoveryAction::RescheduleOtherNode => {
                let alt = alternative.expect("reschedule requires an alternative");
                self.rescheduled.insert(t.clone());
                self.schedule.assignment.insert(t.clone(), alt.clone());
                let msg = format!("moved from `{node}` to `{alt}`");
                self.event(Component::S, EventKind::Reschedule, Some(t), Some(&alt), None, Some(msg.clone()));
                msg
            }
            RecoveryAction::AbortWorkflow => {
                self.event(Component::EE, EventKind::Abort, Some(t), Some(node), None, None);
                "workflow aborted".to_string()
            }
            RecoveryAction::WarnOnly => "run continued".to_string(),
        };
        (action, outcome)
    }

    fn cancel_running(&mut self) {
        let running: Vec<(TaskId, u32)> = self.running.iter().map(|(t, r)| (t.clone(), r.attempt)).collect();
        for (t, a) in running {
            self.backend.kill(&t, a);
            self.end_attempt(&t, AttemptOutcome::Cancelled, None, None);
        }
    }

    /// Ends the run at a hard dynamic violation: the failed task closes the trace.
    fn abort_dynamic(&mut self, t: &TaskId, node: &NodeId) {
        self.cancel_running();
        self.flush_step();
        self.finished.insert(t.clone());
        self.pending_step.insert(t.clone(), node.clone());
        self.flush_step();
        self.status = Some(RunStatus::Failed {
            first_erroneous_step: self.trace.steps.len(),
        });
    }

    fn on_fault(&mut self, f: FaultEvent) {
        match &f {
            FaultEvent::NodeCrash { node, .. } => {
                if let Some(n) = self.cluster.node_mut(node) {
                    n.alive = false;
                }
                self.down_since.insert(node.clone(), self.now());
                self.event(Component::M, EventKind::NodeCrash, None, Some(node), None, None);
                let lost: Vec<(TaskId, u32)> = self
                    .running
                    .iter()
                    .filter(|(_, r)| r.node == *node)
                    .map(|(t, r)| (t.clone(), r.attempt))
                    .collect();
                for (t, a) in lost {
                    self.backend.kill(&t, a);
                    self.end_attempt(&t, AttemptOutcome::Lost, None, None);
                    self.event(Component::EE, EventKind::TaskFailed, Some(&t), Some(node), Some(a), Some("node crashed".into()));
                    self.task_failure(&t, node, "node crashed".into());
                    if self.status.is_some() {
                        return;
                    }
                }
            }
            FaultEvent::NodeRecover { node, .. } => {
                if let Some(n) = self.cluster.node_mut(node) {
                    n.alive = true;
                }
                self.down_since.remove(node);
                self.event(Component::M, EventKind::NodeRecover, None, Some(node), None, None);
                if self.declared_dead.remove(node) {
                    self.event(Component::M, EventKind::NodeAlive, None, Some(node), None, None);
                }
            }
            FaultEvent::FileCorrupt { label, .. } => {
                self.backend.corrupt(label);
                self.event(Component::M, EventKind::FileCorrupt, None, None, None, Some(label.to_string()));
            }
            FaultEvent::LicenseRevoke { name, .. } => {
                self.cluster.licenses.remove(name);
                self.event(Component::M, EventKind::LicenseRevoke, None, None, None, Some(name.clone()));
            }
            FaultEvent::Straggle { .. } => {}
        }
    }

    fn on_heartbeat(&mut self) {
        let limit = self.config.heartbeat_interval_s * self.config.heartbeat_miss_threshold as f64;
        let down: Vec<NodeId> = self.down_since.keys().cloned().collect();
        for n in down {
            if !self.declared_dead.contains(&n) && self.heartbeat_age(&n) >= limit - 1e-9 {
                self.declared_dead.insert(n.clone());
                self.event(Component::M, EventKind::NodeDead, None, Some(&n), None, Some(format!("no heartbeat for {} s", self.heartbeat_age(&n))));
                self.node_dead(&n);
                if self.status.is_some() {
                    return;
                }
            }
        }
        self.clock.schedule(self.now() + self.config.heartbeat_interval_s, HEARTBEAT_RANK, Ev::Heartbeat);
    }

    /// Reports an infrastructure-health violation and moves the node's tasks elsewhere.
    fn node_dead(&mut self, n: &NodeId) {
        let vc = instantiate_catalog(
            CatalogName::SetupInfrastructureHealth,
            CatalogParams {
                id: Some(format!("node/{n}/alive")),
                target: Some(Target::Node(NodeSel::Id(n.clone()))),
                ..CatalogParams::default()
            },
        )
        .expect("catalog defaults are valid");
        let mut e = evaluation(Status::Violated, Some(Value::Bool(false)));
        e.node = Some(n.clone());
        e.detail = Some(format!("no heartbeat for {} s", self.heartbeat_age(n)));
        let mut report = ViolationReport::from_evaluation(&vc, &e, CheckPoint::Step(self.trace.steps.len() + 1), Some(CheckTime::During), self.now())
            .expect("a violated evaluation yields a report");

        let daw = &self.wf.daw;
        let affected: Vec<TaskId> = self
            .schedule
            .assignment
            .iter()
            .filter(|(t, node)| *node == n && !self.finished.contains(*t))
            .map(|(t, _)| t.clone())
            .collect();
        let mut moved = Vec::new();
        let mut stranded = None;
        for t in affected {
            let alt = if t == daw.start || t == daw.end {
                self.cluster.nodes.iter().find(|d| d.alive).map(|d| d.id.clone())
            } else {
                alternative_node(daw, &self.cluster, &t, n)
            };
            match alt {
                Some(a) => {
                    self.schedule.assignment.insert(t.clone(), a.clone());
                    if t != daw.start && t != daw.end {
                        self.event(Component::S, EventKind::Reschedule, Some(&t), Some(&a), None, Some(format!("moved off dead node `{n}`")));
                        moved.push(format!("{t} to `{a}`"));
                    }
                }
                None => {
                    stranded = Some(t);
                    break;
                }
            }
        }
        match stranded {
            None => {
                report.verdict = Verdict::Recovered;
                let outcome = if moved.is_empty() {
                    "no task affected".to_string()
                } else {
                    format!("rescheduled {}", moved.join(", "))
                };
                report.recovery.push(RecoveryRecord {
                    action: RecoveryAction::RescheduleOtherNode,
                    outcome,
                });
                self.reports.push(report);
            }
            Some(t) => {
                report.task = Some(t.clone());
                report.recovery.push(RecoveryRecord {
                    action: RecoveryAction::AbortWorkflow,
                    outcome: format!("no other node can run `{t}`"),
                });
                self.reports.push(report);
                self.event(Component::EE, EventKind::Abort, Some(&t), Some(n), None, None);
                self.abort_dynamic(&t, n);
            }
        }
    }

    fn finish(mut self) -> RunOutcome {
        let status = self.status.clone().unwrap_or(RunStatus::Correct);
        let daw = &self.wf.daw;
        let final_outputs: Vec<LabelId> = daw.incoming(&daw.end).into_iter().map(|d| d.label).collect();
        let sandbox = match self.backend.finish(&final_outputs) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("cleanup failed: {e}");
                None
            }
        };
        self.event(Component::EE, EventKind::Finish, None, None, None, Some(status.to_string()));
        debug_assert!(crate::daw::check_trace(&self.wf.daw, &self.trace).is_ok());
        RunOutcome {
            workflow: self.wf.daw.name.clone(),
            mode: self.backend.mode(),
            exit_code: status.exit_code(),
            status,
            schedule: self.schedule,
            trace: self.trace,
            records: self.records,
            reports: self.reports,
            events: self.events,
            savings: None,
            sandbox,
        }
    }
}

fn evaluation(status: Status, observed: Option<Value>) -> Evaluation {
    Evaluation {
        status,
        observed,
        task: None,
        node: None,
        file: None,
        detail: None,
        check_time: None,
    }
}
