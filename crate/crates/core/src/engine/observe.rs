//! Turning backend evidence into property observations.

use std::collections::BTreeMap;

use super::record::FileFacts;
use crate::constraint::{
    Block, CheckTime, Direction, NodeSel, Observation, PropertyEnvironment, PropertyName, Target,
    ValidityConstraint,
};
use crate::constraint::env::descriptor_value;
use crate::daw::{ClusterSpec, LogicalDaw, TaskDef};
use crate::ids::{LabelId, NodeId};
use crate::lang::{template_variables, Builtin, ContractClause, FailAction};
use crate::value::Value;

/// What a check point knows about the task under inspection.
pub(crate) struct CheckCtx<'a> {
    pub daw: &'a LogicalDaw,
    pub cluster: &'a ClusterSpec,
    pub task: &'a TaskDef,
    pub node: &'a NodeId,
    pub attempt: u32,
    pub time: CheckTime,
    pub now: f64,
    /// Launch time, once launched.
    pub start: Option<f64>,
    pub exit_code: Option<i64>,
}

/// Mode-specific access to files, logs and probes.
pub(crate) trait Evidence {
    /// Facts about a label as the task sees it; `None` when absent.
    fn label(&mut self, ctx: &CheckCtx, dir: Direction, label: &LabelId) -> Option<FileFacts>;
    /// Argument a probe receives for a label.
    fn label_path(&self, ctx: &CheckCtx, dir: Direction, label: &LabelId) -> String;
    fn executable_present(&mut self, ctx: &CheckCtx) -> Result<bool, String>;
    fn logged_no_error(&mut self, ctx: &CheckCtx) -> Result<bool, String>;
    fn inputs_unchanged(&mut self, ctx: &CheckCtx) -> Result<bool, String>;
    fn relation(&mut self, ctx: &CheckCtx, name: &str) -> Result<bool, String>;
    /// Files matched by `ITER(pattern)`: (probe argument, name for reports).
    fn iter(&mut self, ctx: &CheckCtx, block: Block, pattern: &str) -> Result<Vec<(String, String)>, String>;
    /// Runs a shell probe. `detects_fault` marks the condition of an `IF_THEN`.
    fn probe(
        &mut self,
        ctx: &CheckCtx,
        block: Block,
        command: &str,
        vars: &BTreeMap<String, String>,
        detects_fault: bool,
    ) -> Result<ProbeRun, String>;
}

/// Exit status and captured output of one shell probe.
pub(crate) struct ProbeRun {
    pub success: bool,
    pub output: String,
}

/// Outcome of a contract clause, with the file it concerns and probe output.
pub(crate) struct ClauseResult {
    pub holds: Result<bool, String>,
    pub file: Option<String>,
    pub transcript: Option<String>,
}

impl ClauseResult {
    fn new(holds: Result<bool, String>, file: Option<String>) -> Self {
        ClauseResult {
            holds,
            file,
            transcript: None,
        }
    }
}

fn label_obs(facts: Option<&FileFacts>, name: &PropertyName, label: &LabelId) -> Option<Observation> {
    let v = match (name, facts) {
        (PropertyName::FileExists, f) => Value::Bool(f.is_some()),
        (PropertyName::FolderExists, f) => Value::Bool(f.is_some_and(|f| f.is_dir)),
        (PropertyName::FileSizeBytes, Some(f)) => Value::Int(f.size_bytes.min(i64::MAX as u64) as i64),
        (PropertyName::Checksum, Some(f)) => Value::Str(f.sha256.clone()),
        (PropertyName::FormatOk, Some(f)) => Value::Bool(f.format_ok),
        _ => return None,
    };
    Some(Observation::new(v).with_file(label.as_str()))
}

fn bool_obs(r: Result<bool, String>) -> Option<Observation> {
    match r {
        Ok(b) => Some(Observation::new(Value::Bool(b))),
        Err(e) => {
            log::warn!("unevaluable property: {e}");
            None
        }
    }
}

fn task_obs(ev: &mut dyn Evidence, ctx: &CheckCtx, name: &PropertyName) -> Option<Observation> {
    match name {
        PropertyName::RuntimeSeconds => ctx.start.map(|s| Observation::new(Value::Decimal(ctx.now - s))),
        PropertyName::ExitCode => ctx.exit_code.map(|c| Observation::new(Value::Int(c))),
        PropertyName::ExecutablePresent => bool_obs(ev.executable_present(ctx)),
        PropertyName::LoggedNoError => bool_obs(ev.logged_no_error(ctx)),
        PropertyName::InputsUnchanged => bool_obs(ev.inputs_unchanged(ctx)),
        PropertyName::RelationHolds(r) => bool_obs(ev.relation(ctx, r)),
        PropertyName::LicenseAvailable(l) => Some(Observation::new(Value::Bool(ctx.cluster.licenses.contains(l)))),
        PropertyName::ConfigParam(k) => ctx.task.params.get(k).cloned().map(Observation::new),
        PropertyName::ClauseHolds(block, i) => {
            let clauses = match block {
                Block::Require => &ctx.task.contracts.requires,
                Block::Promise => &ctx.task.contracts.promises,
            };
            let clause = clauses.get(*i)?;
            let mut vars = label_vars(ev, ctx);
            let text = crate::lang::clause_text(clause);
            let r = eval_clause(ev, ctx, *block, clause, &mut vars, false);
            match r.holds {
                Ok(holds) => {
                    let mut obs = Observation::new(Value::Bool(holds));
                    if !holds {
                        let mut detail = match &r.file {
                            Some(f) => format!("clause `{text}` failed on file `{f}`"),
                            None => format!("clause `{text}` failed"),
                        };
                        if let Some(t) = r.transcript.filter(|t| !t.trim().is_empty()) {
                            detail.push_str(&format!("; probe output: {}", t.trim()));
                        }
                        obs = obs.with_detail(detail);
                    }
                    Some(match r.file {
                        Some(f) => obs.with_file(f),
                        None => obs,
                    })
                }
                Err(e) => {
                    log::warn!("clause `{text}` of task `{}` is unevaluable: {e}", ctx.task.id);
                    None
                }
            }
        }
        _ => None,
    }
}

/// Probe variables for the task's labels.
fn label_vars(ev: &dyn Evidence, ctx: &CheckCtx) -> BTreeMap<String, String> {
    let mut vars = BTreeMap::new();
    for l in &ctx.task.inputs {
        vars.insert(l.to_string(), ev.label_path(ctx, Direction::Incoming, l));
    }
    for l in &ctx.task.outputs {
        vars.insert(l.to_string(), ev.label_path(ctx, Direction::Outgoing, l));
    }
    vars
}

/// Evaluates a contract clause.
pub(crate) fn eval_clause(
    ev: &mut dyn Evidence,
    ctx: &CheckCtx,
    block: Block,
    clause: &ContractClause,
    vars: &mut BTreeMap<String, String>,
    in_condition: bool,
) -> ClauseResult {
    match clause {
        ContractClause::Atom(a) => {
            let target = match crate::lang::resolve_target(ctx.task, &a.target) {
                Ok(t) => t,
                Err(e) => return ClauseResult::new(Err(e.to_string()), None),
            };
            let obs = observation(ev, ctx, &target, &a.property);
            let file = obs.as_ref().and_then(|o| o.file.clone());
            match obs.and_then(|o| a.op.apply(&o.value, &a.value)) {
                Some(b) => ClauseResult::new(Ok(b), file),
                None => ClauseResult::new(Err(format!("no comparable value for `{}`", a.property)), file),
            }
        }
        ContractClause::ShellProbe { command } => {
            let file = template_variables(command)
                .into_iter()
                .find(|v| ctx.task.inputs.iter().chain(&ctx.task.outputs).any(|l| l.as_str() == v));
            match ev.probe(ctx, block, command, vars, in_condition) {
                Ok(run) => ClauseResult {
                    holds: Ok(run.success),
                    file,
                    transcript: Some(run.output),
                },
                Err(e) => ClauseResult::new(Err(e), file),
            }
        }
        ContractClause::Builtin(b) => {
            let r = match b {
                Builtin::CommandLoggedNoError => ev.logged_no_error(ctx),
                Builtin::InputsNotChanged => ev.inputs_unchanged(ctx),
            };
            ClauseResult::new(r, None)
        }
        ContractClause::IfThen { condition, action } => {
            let mut r = eval_clause(ev, ctx, block, condition, vars, true);
            r.holds = r.holds.map(|c| !c);
            if matches!(r.holds, Ok(false)) && *action == FailAction::Warn {
                log::warn!("task `{}`: warning clause triggered", ctx.task.id);
            }
            r
        }
        ContractClause::ForAll { binder, pattern, body } => {
            let matches = match ev.iter(ctx, block, pattern) {
                Ok(m) => m,
                Err(e) => return ClauseResult::new(Err(e), None),
            };
            for (arg, name) in matches {
                let previous = vars.insert(binder.clone(), arg);
                let r = eval_clause(ev, ctx, block, body, vars, in_condition);
                match previous {
                    Some(p) => vars.insert(binder.clone(), p),
                    None => vars.remove(binder),
                };
                if !matches!(r.holds, Ok(true)) {
                    return ClauseResult { file: Some(name), ..r };
                }
            }
            ClauseResult::new(Ok(true), None)
        }
    }
}

/// The observation of one property of one target at this check point.
pub(crate) fn observation(ev: &mut dyn Evidence, ctx: &CheckCtx, target: &Target, name: &PropertyName) -> Option<Observation> {
    match target {
        Target::Task(_) => task_obs(ev, ctx, name),
        Target::Label { label, direction: Some(dir) } => {
            let facts = ev.label(ctx, *dir, label);
            label_obs(facts.as_ref(), name, label)
        }
        Target::Node(NodeSel::Id(n)) => ctx.cluster.node(n).and_then(|d| descriptor_value(d, name)).map(Observation::new),
        Target::Node(NodeSel::ScheduledNodeOf(_)) => ctx
            .cluster
            .node(ctx.node)
            .and_then(|d| descriptor_value(d, name))
            .map(Observation::new),
        _ => None,
    }
}

/// Fills `env` with everything `vcs` read about the task in `ctx`.
pub(crate) fn observe(ev: &mut dyn Evidence, ctx: &CheckCtx, vcs: &[&ValidityConstraint], env: &mut PropertyEnvironment) {
    let t = &ctx.task.id;
    for vc in vcs {
        let name = &vc.lhs.name;
        match &vc.lhs.target {
            Target::Task(_) => {
                if let Some(o) = task_obs(ev, ctx, name) {
                    env.set_task(t, name.clone(), o);
                }
            }
            Target::Label { label, direction: Some(dir) } => {
                let deps = match dir {
                    Direction::Incoming => ctx.daw.incoming(t),
                    Direction::Outgoing => ctx.daw.outgoing(t),
                };
                let facts = ev.label(ctx, *dir, label);
                for d in deps.iter().filter(|d| d.label == *label) {
                    if let Some(o) = label_obs(facts.as_ref(), name, label) {
                        env.set_dep(&d.from, &d.to, name.clone(), o);
                    }
                }
            }
            // Node properties come from the cluster held by `env`.
            _ => {}
        }
    }
}
