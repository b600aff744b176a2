use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{Atom, AtomTarget, Builtin, ContractClause, FailAction, WorkflowDocument};
use crate::constraint::{
    instantiate_catalog, Block, CatalogName, CatalogParams, CheckTime, Direction, NodeSel,
    PropertyName, Quantifier, Severity, Target, ValidityConstraint, VcError, VcKind,
};
use crate::daw::{validate_structure, LogicalDaw, StructuralError, TaskDef};
use crate::ids::{LabelId, TaskId, END_TASK, START_TASK};
use crate::value::{ComparisonOp, Value};

/// A document lowered onto the formal objects.
#[derive(Debug, Clone, PartialEq)]
pub struct Desugared {
    pub daw: LogicalDaw,
    pub static_vcs: Vec<ValidityConstraint>,
    pub dynamic_vcs: BTreeMap<TaskId, Vec<ValidityConstraint>>,
    /// Labels no task produces; they are read from the workflow's data directory.
    pub workflow_inputs: BTreeSet<LabelId>,
}

impl Desugared {
    pub fn dynamic(&self) -> impl Iterator<Item = &ValidityConstraint> {
        self.dynamic_vcs.values().flatten()
    }

    pub fn all_vcs(&self) -> Vec<ValidityConstraint> {
        self.static_vcs.iter().chain(self.dynamic()).cloned().collect()
    }

    /// Drops every static constraint (the counterfactual used for savings).
    pub fn without_static(&self) -> Desugared {
        Desugared {
            static_vcs: Vec::new(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesugarError {
    #[error("dependency `{label}` references undeclared task `{task}`")]
    UnknownTask { label: LabelId, task: TaskId },
    #[error("label `{label}` is produced by both `{first}` and `{second}`")]
    MultipleProducers {
        label: LabelId,
        first: TaskId,
        second: TaskId,
    },
    #[error("tasks `{from}` and `{to}` exchange both `{first}` and `{second}`; bundle them in one directory")]
    ConflictingLabels {
        from: TaskId,
        to: TaskId,
        first: LabelId,
        second: LabelId,
    },
    #[error("task `{task}` reads several workflow inputs ({}); bundle them in one directory", join(.labels))]
    TooManyWorkflowInputs { task: TaskId, labels: Vec<LabelId> },
    #[error("task `{task}` leaves several outputs unconsumed ({}); bundle them in one directory", join(.labels))]
    TooManyFinalOutputs { task: TaskId, labels: Vec<LabelId> },
    #[error("task `{task}` does not declare label `{label}` as {side}")]
    UndeclaredLabel {
        task: TaskId,
        label: LabelId,
        side: &'static str,
    },
    #[error("`{target}` cannot be used {context}")]
    MisplacedTarget { target: String, context: String },
    #[error("probe `{command}` in task `{task}` references unknown variable `{var}`")]
    UnknownVariable {
        task: TaskId,
        command: String,
        var: String,
    },
    #[error("constraint `{id}`: {error}")]
    Constraint { id: String, error: VcError },
    #[error("workflow structure is invalid: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Structure(Vec<StructuralError>),
}

fn join(ls: &[LabelId]) -> String {
    ls.iter().map(|l| format!("`{l}`")).collect::<Vec<_>>().join(", ")
}

/// Label of an injected start or end edge.
pub fn synthetic_label(from: &TaskId, to: &TaskId) -> LabelId {
    LabelId::new(format!("{from}->{to}"))
}

/// Lowers a document onto a logical workflow and its constraints.
pub fn desugar(doc: &WorkflowDocument) -> Result<Desugared, DesugarError> {
    let start = TaskId::new(START_TASK);
    let end = TaskId::new(END_TASK);

    let mut defs: BTreeMap<TaskId, TaskDef> = BTreeMap::new();
    let defaults: BTreeMap<String, Value> = doc.params.iter().map(|p| (p.name.clone(), p.default.clone())).collect();
    for t in &doc.tasks {
        let mut params = defaults.clone();
        params.extend(t.params.clone());
        defs.insert(
            t.id.clone(),
            TaskDef {
                id: t.id.clone(),
                command: t.command.clone(),
                inputs: t.inputs.clone(),
                outputs: t.outputs.clone(),
                resource_request: t.resources.clone(),
                max_runtime: t.max_runtime,
                params,
                contracts: t.contracts(),
                sim_profile: t.sim.clone(),
            },
        );
    }

    // Declared dependencies extend the tasks' inputs and outputs.
    let mut edges: BTreeMap<(TaskId, TaskId), LabelId> = BTreeMap::new();
    let add_edge = |edges: &mut BTreeMap<(TaskId, TaskId), LabelId>, from: &TaskId, to: &TaskId, label: &LabelId| {
        match edges.get(&(from.clone(), to.clone())) {
            Some(existing) if existing != label => Err(DesugarError::ConflictingLabels {
                from: from.clone(),
                to: to.clone(),
                first: existing.clone(),
                second: label.clone(),
            }),
            _ => {
                edges.insert((from.clone(), to.clone()), label.clone());
                Ok(())
            }
        }
    };
    for d in &doc.deps {
        for t in [&d.from, &d.to] {
            if !defs.contains_key(t) {
                return Err(DesugarError::UnknownTask {
                    label: d.label.clone(),
                    task: t.clone(),
                });
            }
        }
        push_unique(&mut defs.get_mut(&d.from).unwrap().outputs, &d.label);
        push_unique(&mut defs.get_mut(&d.to).unwrap().inputs, &d.label);
        add_edge(&mut edges, &d.from, &d.to, &d.label)?;
    }

    let mut producer: BTreeMap<LabelId, TaskId> = BTreeMap::new();
    for (id, def) in &defs {
        for l in &def.outputs {
            if let Some(first) = producer.insert(l.clone(), id.clone()) {
                if first != *id {
                    return Err(DesugarError::MultipleProducers {
                        label: l.clone(),
                        first,
                        second: id.clone(),
                    });
                }
            }
        }
    }

    // Inputs produced by another task imply a dependency.
    for (id, def) in &defs {
        for l in &def.inputs {
            if let Some(p) = producer.get(l) {
                if p != id {
                    add_edge(&mut edges, p, id, l)?;
                }
            }
        }
    }

    let mut workflow_inputs = BTreeSet::new();
    let mut extra = Vec::new();
    for (id, def) in &defs {
        let unproduced: Vec<LabelId> = def.inputs.iter().filter(|l| !producer.contains_key(*l)).cloned().collect();
        let has_incoming = edges.keys().any(|(_, to)| to == id);
        match unproduced.len() {
            0 if !has_incoming => extra.push((start.clone(), id.clone(), synthetic_label(&start, id))),
            0 => {}
            1 => extra.push((start.clone(), id.clone(), unproduced[0].clone())),
            _ => {
                return Err(DesugarError::TooManyWorkflowInputs {
                    task: id.clone(),
                    labels: unproduced,
                })
            }
        }
        workflow_inputs.extend(unproduced);

        let consumed: BTreeSet<&LabelId> = edges
            .iter()
            .filter(|((from, _), _)| from == id)
            .map(|(_, l)| l)
            .collect();
        let unconsumed: Vec<LabelId> = def.outputs.iter().filter(|l| !consumed.contains(l)).cloned().collect();
        match unconsumed.len() {
            0 if consumed.is_empty() => extra.push((id.clone(), end.clone(), synthetic_label(id, &end))),
            0 => {}
            1 => extra.push((id.clone(), end.clone(), unconsumed[0].clone())),
            _ => {
                return Err(DesugarError::TooManyFinalOutputs {
                    task: id.clone(),
                    labels: unconsumed,
                })
            }
        }
    }
    if defs.is_empty() {
        extra.push((start.clone(), end.clone(), synthetic_label(&start, &end)));
    }
    for (from, to, label) in extra {
        edges.insert((from, to), label);
    }

    let mut tasks: BTreeSet<TaskId> = defs.keys().cloned().collect();
    tasks.insert(start.clone());
    tasks.insert(end.clone());
    let mut task_defs = defs;
    task_defs.insert(start.clone(), TaskDef::new(start.clone()));
    task_defs.insert(end.clone(), TaskDef::new(end.clone()));
    let daw = LogicalDaw {
        name: doc.name.clone(),
        tasks,
        deps: edges.keys().cloned().collect(),
        labels: edges,
        start,
        end,
        task_defs,
    };
    let errors = validate_structure(&daw);
    if !errors.is_empty() {
        return Err(DesugarError::Structure(errors));
    }

    let mut static_vcs = Vec::new();
    for (i, a) in doc.requires.iter().enumerate() {
        static_vcs.push(static_atom(a, &format!("requires#{i}"), &daw)?);
    }

    let ranges: BTreeMap<&str, &Vec<(ComparisonOp, Value)>> = doc.params.iter().map(|p| (p.name.as_str(), &p.range)).collect();
    let mut dynamic_vcs = BTreeMap::new();
    for block in &doc.tasks {
        let def = &daw.task_defs[&block.id];
        let (st, dy) = task_constraints(def, &block.params, &ranges, &workflow_inputs)?;
        static_vcs.extend(st);
        dynamic_vcs.insert(block.id.clone(), dy);
    }

    Ok(Desugared {
        daw,
        static_vcs,
        dynamic_vcs,
        workflow_inputs,
    })
}

fn push_unique(v: &mut Vec<LabelId>, l: &LabelId) {
    if !v.contains(l) {
        v.push(l.clone());
    }
}

/// Catalog entry an atom over `property` instantiates.
pub(crate) fn entry_for(property: &PropertyName, kind: VcKind) -> CatalogName {
    use PropertyName::*;
    match property {
        MemoryBytes | CpuCores | GpuCount | DiskFreeBytes => match kind {
            VcKind::Static => CatalogName::SetupResourceAvailability,
            VcKind::Dynamic => CatalogName::TaskResourceAvailability,
        },
        FileExists => match kind {
            VcKind::Static => CatalogName::SetupFileMustExist,
            VcKind::Dynamic => CatalogName::FileFileMustExist,
        },
        FolderExists => CatalogName::FileFolderExists,
        FileSizeBytes | Checksum | FormatOk | InputsUnchanged | ClauseHolds(..) => CatalogName::FileFileProperties,
        NodeAlive | HeartbeatAgeSeconds => CatalogName::SetupInfrastructureHealth,
        HasExecutable(_) | ExecutablePresent => CatalogName::TaskExecutableMustExist,
        ExitCode | LoggedNoError => CatalogName::TaskEndsCorrectly,
        RuntimeSeconds => CatalogName::TaskEndsWithinLimits,
        LicenseAvailable(_) => CatalogName::TaskLicenceValid,
        ConfigParam(_) => CatalogName::TaskConfigurationParameters,
        RelationHolds(_) => CatalogName::TaskMetamorphicRelation,
    }
}

fn build(
    id: String,
    kind: VcKind,
    target: Target,
    property: PropertyName,
    op: ComparisonOp,
    value: Value,
    quantifier: Option<Quantifier>,
    severity: Option<Severity>,
    task: Option<TaskId>,
    time: Option<Vec<CheckTime>>,
) -> Result<ValidityConstraint, DesugarError> {
    let entry = entry_for(&property, kind);
    instantiate_catalog(
        entry,
        CatalogParams {
            id: Some(id.clone()),
            kind: Some(kind),
            target: Some(target),
            property: Some(property),
            op: Some(op),
            value: Some(value),
            quantifier,
            severity,
            task,
            time_of_check: time,
        },
    )
    .map_err(|error| DesugarError::Constraint { id, error })
}

fn static_atom(a: &Atom, id: &str, daw: &LogicalDaw) -> Result<ValidityConstraint, DesugarError> {
    let misplaced = || DesugarError::MisplacedTarget {
        target: a.target.to_string(),
        context: "in workflow requirements".into(),
    };
    let (target, task) = match &a.target {
        AtomTarget::Cluster => (Target::Node(NodeSel::Cluster), None),
        AtomTarget::Node(n) => (Target::Node(NodeSel::Id(n.clone())), None),
        AtomTarget::Data(l) => (Target::Label { label: l.clone(), direction: None }, None),
        AtomTarget::Task(Some(t)) => {
            if !daw.task_defs.contains_key(t) {
                return Err(DesugarError::UnknownTask {
                    label: LabelId::new(id),
                    task: t.clone(),
                });
            }
            (Target::Task(t.clone()), Some(t.clone()))
        }
        AtomTarget::Task(None) | AtomTarget::ScheduledNode | AtomTarget::Input(_) | AtomTarget::Output(_) => {
            return Err(misplaced())
        }
    };
    build(
        id.to_string(),
        VcKind::Static,
        target,
        a.property.clone(),
        a.op,
        a.value.clone(),
        a.quantifier,
        a.severity,
        task,
        None,
    )
}

/// Failure severity of a composite clause.
fn clause_severity(c: &ContractClause) -> Option<Severity> {
    match c {
        ContractClause::IfThen { action: FailAction::Warn, .. } => Some(Severity::Soft),
        ContractClause::ForAll { body, .. } => clause_severity(body),
        _ => None,
    }
}

type TaskVcs = (Vec<ValidityConstraint>, Vec<ValidityConstraint>);

fn task_constraints(
    def: &TaskDef,
    own_params: &BTreeMap<String, Value>,
    ranges: &BTreeMap<&str, &Vec<(ComparisonOp, Value)>>,
    workflow_inputs: &BTreeSet<LabelId>,
) -> Result<TaskVcs, DesugarError> {
    let t = &def.id;
    let mut st = Vec::new();
    let mut dy = Vec::new();
    let before = Some(vec![CheckTime::Before]);
    let after = Some(vec![CheckTime::After]);

    let r = &def.resource_request;
    for (prop, amount) in [
        (PropertyName::MemoryBytes, r.memory_bytes),
        (PropertyName::CpuCores, r.cpu_cores as u64),
        (PropertyName::GpuCount, r.gpu_count as u64),
        (PropertyName::DiskFreeBytes, r.disk_bytes),
    ] {
        if amount == 0 {
            continue;
        }
        let v = Value::Int(amount.min(i64::MAX as u64) as i64);
        st.push(build(
            format!("{t}/setup:{prop}"),
            VcKind::Static,
            Target::Node(NodeSel::Cluster),
            prop.clone(),
            ComparisonOp::Ge,
            v.clone(),
            Some(Quantifier::AtLeastOneNode),
            None,
            Some(t.clone()),
            None,
        )?);
        dy.push(build(
            format!("{t}/resources:{prop}"),
            VcKind::Dynamic,
            Target::Node(NodeSel::ScheduledNodeOf(t.clone())),
            prop,
            ComparisonOp::Ge,
            v,
            None,
            None,
            Some(t.clone()),
            None,
        )?);
    }

    if def.command.is_some() {
        dy.push(build(
            format!("{t}/executable"),
            VcKind::Dynamic,
            Target::Task(t.clone()),
            PropertyName::ExecutablePresent,
            ComparisonOp::Eq,
            Value::Bool(true),
            None,
            None,
            Some(t.clone()),
            None,
        )?);
    }

    for l in &def.inputs {
        if workflow_inputs.contains(l) || !l.as_str().contains("->") {
            dy.push(build(
                format!("{t}/input:{l}"),
                VcKind::Dynamic,
                Target::Label { label: l.clone(), direction: Some(Direction::Incoming) },
                PropertyName::FileExists,
                ComparisonOp::Eq,
                Value::Bool(true),
                None,
                None,
                Some(t.clone()),
                before.clone(),
            )?);
        }
    }
    for l in &def.outputs {
        dy.push(build(
            format!("{t}/output:{l}"),
            VcKind::Dynamic,
            Target::Label { label: l.clone(), direction: Some(Direction::Outgoing) },
            PropertyName::FileExists,
            ComparisonOp::Eq,
            Value::Bool(true),
            None,
            None,
            Some(t.clone()),
            after.clone(),
        )?);
    }

    // Checked while the task runs: a task still running at the limit violates it.
    if let Some(limit) = def.max_runtime {
        dy.push(build(
            format!("{t}/max_runtime"),
            VcKind::Dynamic,
            Target::Task(t.clone()),
            PropertyName::RuntimeSeconds,
            ComparisonOp::Lt,
            Value::Decimal(limit),
            None,
            None,
            Some(t.clone()),
            None,
        )?);
    }

    for k in own_params.keys() {
        let Some(range) = ranges.get(k.as_str()) else { continue };
        for (j, (op, bound)) in range.iter().enumerate() {
            dy.push(build(
                format!("{t}/param:{k}#{j}"),
                VcKind::Dynamic,
                Target::Task(t.clone()),
                PropertyName::ConfigParam(k.clone()),
                *op,
                bound.clone(),
                None,
                None,
                Some(t.clone()),
                before.clone(),
            )?);
        }
    }

    for (block, clauses, time) in [
        (Block::Require, &def.contracts.requires, &before),
        (Block::Promise, &def.contracts.promises, &after),
    ] {
        for (i, c) in clauses.iter().enumerate() {
            check_probe_variables(def, c, &mut Vec::new())?;
            let id = format!("{t}/{block}#{i}");
            let mut vc = match c {
                ContractClause::Atom(a) => contract_atom(def, a, id, time.clone())?,
                ContractClause::Builtin(b) => {
                    let prop = match b {
                        Builtin::CommandLoggedNoError => PropertyName::LoggedNoError,
                        Builtin::InputsNotChanged => PropertyName::InputsUnchanged,
                    };
                    build(id, VcKind::Dynamic, Target::Task(t.clone()), prop, ComparisonOp::Eq, Value::Bool(true), None, None, Some(t.clone()), time.clone())?
                }
                _ => build(
                    id,
                    VcKind::Dynamic,
                    Target::Task(t.clone()),
                    PropertyName::ClauseHolds(block, i),
                    ComparisonOp::Eq,
                    Value::Bool(true),
                    None,
                    clause_severity(c),
                    Some(t.clone()),
                    time.clone(),
                )?,
            };
            vc.clause = Some(c.clone());
            dy.push(vc);
        }
    }
    Ok((st, dy))
}

fn contract_atom(def: &TaskDef, a: &Atom, id: String, time: Option<Vec<CheckTime>>) -> Result<ValidityConstraint, DesugarError> {
    let t = &def.id;
    let target = contract_target(def, &a.target)?;
    build(id, VcKind::Dynamic, target, a.property.clone(), a.op, a.value.clone(), a.quantifier, a.severity, Some(t.clone()), time)
}

/// Resolves an atom target inside the contract of `def`.
pub(crate) fn contract_target(def: &TaskDef, target: &AtomTarget) -> Result<Target, DesugarError> {
    let t = &def.id;
    Ok(match target {
        AtomTarget::Task(None) => Target::Task(t.clone()),
        AtomTarget::Task(Some(other)) if other == t => Target::Task(t.clone()),
        AtomTarget::ScheduledNode => Target::Node(NodeSel::ScheduledNodeOf(t.clone())),
        AtomTarget::Node(n) => Target::Node(NodeSel::Id(n.clone())),
        AtomTarget::Input(l) => {
            if !def.inputs.contains(l) {
                return Err(DesugarError::UndeclaredLabel {
                    task: t.clone(),
                    label: l.clone(),
                    side: "an input",
                });
            }
            Target::Label { label: l.clone(), direction: Some(Direction::Incoming) }
        }
        AtomTarget::Output(l) => {
            if !def.outputs.contains(l) {
                return Err(DesugarError::UndeclaredLabel {
                    task: t.clone(),
                    label: l.clone(),
                    side: "an output",
                });
            }
            Target::Label { label: l.clone(), direction: Some(Direction::Outgoing) }
        }
        AtomTarget::Task(Some(_)) | AtomTarget::Cluster | AtomTarget::Data(_) => {
            return Err(DesugarError::MisplacedTarget {
                target: target.to_string(),
                context: format!("in the contract of task `{t}`"),
            })
        }
    })
}

fn check_probe_variables(def: &TaskDef, c: &ContractClause, bound: &mut Vec<String>) -> Result<(), DesugarError> {
    match c {
        ContractClause::ForAll { binder, body, .. } => {
            bound.push(binder.clone());
            let r = check_probe_variables(def, body, bound);
            bound.pop();
            r
        }
        ContractClause::IfThen { condition, .. } => check_probe_variables(def, condition, bound),
        ContractClause::ShellProbe { command } => {
            for var in template_variables(command) {
                let known = bound.contains(&var)
                    || def.inputs.iter().chain(&def.outputs).any(|l| l.as_str() == var);
                if !known {
                    return Err(DesugarError::UnknownVariable {
                        task: def.id.clone(),
                        command: command.clone(),
                        var,
                    });
                }
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

/// One piece of a probe template.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Var(String),
}

fn template_pieces(template: &str) -> Vec<Piece> {
    let chars: Vec<char> = template.chars().collect();
    let mut out = Vec::new();
    let mut text = String::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '$' {
            match chars.get(i + 1) {
                Some('$') => {
                    text.push('$');
                    i += 2;
                    continue;
                }
                Some('{') => {
                    if let Some(close) = chars[i + 2..].iter().position(|c| *c == '}') {
                        out.push(Piece::Text(std::mem::take(&mut text)));
                        out.push(Piece::Var(chars[i + 2..i + 2 + close].iter().collect()));
                        i += close + 3;
                        continue;
                    }
                }
                Some(c) if c.is_ascii_alphabetic() || *c == '_' => {
                    let mut j = i + 1;
                    while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                        j += 1;
                    }
                    out.push(Piece::Text(std::mem::take(&mut text)));
                    out.push(Piece::Var(chars[i + 1..j].iter().collect()));
                    i = j;
                    continue;
                }
                _ => {}
            }
        }
        text.push(chars[i]);
        i += 1;
    }
    out.push(Piece::Text(text));
    out.retain(|p| *p != Piece::Text(String::new()));
    out
}

/// Variables referenced by a probe template: `$name` or `${name}`; `$$` is a literal dollar.
pub fn template_variables(template: &str) -> Vec<String> {
    template_pieces(template)
        .into_iter()
        .filter_map(|p| match p {
            Piece::Var(v) => Some(v),
            Piece::Text(_) => None,
        })
        .collect()
}

/// Substitutes shell-quoted values for the variables of a probe template.
pub fn interpolate(template: &str, values: &BTreeMap<String, String>) -> Result<String, String> {
    let mut out = String::new();
    for p in template_pieces(template) {
        match p {
            Piece::Text(t) => out.push_str(&t),
            Piece::Var(v) => {
                let value = values.get(&v).ok_or_else(|| format!("unbound variable `{v}`"))?;
                out.push_str(&shell_quote(value));
            }
        }
    }
    Ok(out)
}

/// Single-quotes a string for POSIX shells.
pub fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    fn lower(src: &str) -> Result<Desugared, DesugarError> {
        desugar(&parse(src).unwrap())
    }

    #[test]
    fn injects_start_and_end() {
        let d = lower("workflow w { task a { outputs: [x] } task b { inputs: [x] } }").unwrap();
        let deps: Vec<(&str, &str)> = d.daw.deps.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        assert_eq!(deps, vec![("__start__", "a"), ("a", "b"), ("b", "__end__")]);
        assert_eq!(d.daw.labels[&(TaskId::new("a"), TaskId::new("b"))], LabelId::new("x"));
    }

    #[test]
    fn empty_workflow() {
        let d = lower("workflow w { }").unwrap();
        assert_eq!(d.daw.tasks.len(), 2);
        assert!(d.static_vcs.is_empty() && d.dynamic().next().is_none());
    }

    #[test]
    fn workflow_inputs_label_start_edges() {
        let d = lower(r#"workflow w { task a { inputs: ["genome.fa"] outputs: ["counts.txt"] } }"#).unwrap();
        assert_eq!(d.daw.labels[&(TaskId::new(START_TASK), TaskId::new("a"))], LabelId::new("genome.fa"));
        assert_eq!(d.daw.labels[&(TaskId::new("a"), TaskId::new(END_TASK))], LabelId::new("counts.txt"));
        assert!(d.workflow_inputs.contains(&LabelId::new("genome.fa")));
    }

    #[test]
    fn self_loop_is_structural() {
        let e = lower("workflow w { task a {} dep x: a -> a }").unwrap_err();
        assert!(matches!(e, DesugarError::Structure(_)));
    }

    #[test]
    fn resources_yield_static_and_dynamic_checks() {
        let d = lower("workflow w { task t { resources { memory_bytes: 4Gi } } }").unwrap();
        let dy = &d.dynamic_vcs[&TaskId::new("t")];
        assert_eq!(dy[0].entry, CatalogName::TaskResourceAvailability);
        assert_eq!(dy[0].lhs.target, Target::Node(NodeSel::ScheduledNodeOf("t".into())));
        assert_eq!(d.static_vcs[0].entry, CatalogName::SetupResourceAvailability);
        assert_eq!(d.static_vcs[0].quantifier, Some(Quantifier::AtLeastOneNode));
    }

    #[test]
    fn max_runtime_is_a_during_check() {
        let d = lower("workflow w { task t { max_runtime: 60 } }").unwrap();
        let vc = &d.dynamic_vcs[&TaskId::new("t")][0];
        assert_eq!(vc.entry, CatalogName::TaskEndsWithinLimits);
        assert_eq!(vc.metadata.time_of_check, vec![CheckTime::During]);
    }

    #[test]
    fn block_times() {
        let d = lower(
            r#"workflow w { task t { outputs: [o]
                 require { node.memory_bytes >= 1Gi  COND("true") }
                 promise { output(o).file_size_bytes > 0  COMMAND_LOGGED_NO_ERROR() INPUTS_NOT_CHANGED() } } }"#,
        )
        .unwrap();
        for vc in &d.dynamic_vcs[&TaskId::new("t")] {
            if vc.id.contains("/require#") {
                assert_eq!(vc.metadata.time_of_check, vec![CheckTime::Before]);
            }
            if vc.id.contains("/promise#") {
                assert_eq!(vc.metadata.time_of_check, vec![CheckTime::After]);
            }
        }
    }

    #[test]
    fn probe_variables() {
        assert_eq!(template_variables("grep x $f ${genome.fa} $$HOME $1"), vec!["f", "genome.fa"]);
        let mut m = BTreeMap::new();
        m.insert("f".to_string(), "it's.fa".to_string());
        assert_eq!(interpolate("wc -l $f", &m).unwrap(), r"wc -l 'it'\''s.fa'");
        let e = lower(r#"workflow w { task t { require { COND("cat $nope") } } }"#).unwrap_err();
        assert!(matches!(e, DesugarError::UnknownVariable { .. }));
        let e = lower(r#"workflow w { task t { require { COND("cat $f") } } }"#).unwrap_err();
        assert!(matches!(e, DesugarError::UnknownVariable { .. }), "binder outside FOR_ALL");
    }

    #[test]
    fn misplaced_targets() {
        assert!(lower("workflow w { requires { task.exit_code = 0 } }").is_err());
        assert!(lower("workflow w { task t { require { cluster.memory_bytes >= 1 } } }").is_err());
        assert!(matches!(
            lower("workflow w { task t { require { input(zzz).file_exists = true } } }").unwrap_err(),
            DesugarError::UndeclaredLabel { .. }
        ));
    }

    #[test]
    fn too_many_workflow_inputs() {
        let e = lower("workflow w { task t { inputs: [a, b] } }").unwrap_err();
        assert!(matches!(e, DesugarError::TooManyWorkflowInputs { .. }));
    }

    #[test]
    fn soft_on_a_hard_entry_is_rejected() {
        let e = lower("workflow w { task t { require { task.runtime_seconds <= 1 soft } } }").unwrap_err();
        assert!(matches!(e, DesugarError::Constraint { .. }));
    }
}
