//! Re-checking a finished run from its preserved artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::real::file_facts;
use super::record::{CheckOutcome, FileFacts};
use super::RunOutcome;
use crate::constraint::{
    evaluate_dynamic, instantiate_catalog, CatalogName, CatalogParams, CheckPoint, CheckTime, Direction, Evaluation,
    Observation, Phase, PropertyEnvironment, PropertyName, Scope, Status, Target, ValidityConstraint, VcType,
    ViolationReport,
};
use crate::daw::LogicalDaw;
use crate::ids::{LabelId, NodeId, TaskId};
use crate::lang::Desugared;
use crate::value::{ComparisonOp, Value};

/// Where preserved artifacts are read from.
#[derive(Debug, Clone, PartialEq)]
pub enum ArtifactStore {
    /// A kept real-mode sandbox.
    Directory(PathBuf),
    /// File facts recorded by a kept simulation, keyed by sandbox-relative path.
    Manifest(BTreeMap<String, FileFacts>),
}

impl ArtifactStore {
    /// Opens a kept sandbox: a simulation manifest if present, else the directory.
    pub fn open(root: &Path) -> std::io::Result<ArtifactStore> {
        let manifest = root.join("manifest.json");
        if manifest.is_file() {
            let text = std::fs::read_to_string(manifest)?;
            let m = serde_json::from_str(&text).map_err(std::io::Error::other)?;
            return Ok(ArtifactStore::Manifest(m));
        }
        if !root.is_dir() {
            return Err(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("no sandbox at `{}`", root.display()),
            ));
        }
        Ok(ArtifactStore::Directory(root.to_path_buf()))
    }

    pub fn facts(&self, rel: &str) -> Option<FileFacts> {
        match self {
            ArtifactStore::Directory(root) => file_facts(&root.join(rel)),
            ArtifactStore::Manifest(m) => m.get(rel).cloned(),
        }
    }

    /// Every stored path, for locating staged copies of workflow inputs.
    fn paths(&self) -> Vec<String> {
        match self {
            ArtifactStore::Manifest(m) => m.keys().cloned().collect(),
            ArtifactStore::Directory(root) => walkdir::WalkDir::new(root)
                .into_iter()
                .flatten()
                .filter_map(|e| e.path().strip_prefix(root).ok().map(|p| p.to_string_lossy().into_owned()))
                .collect(),
        }
    }
}

/// Live and posthoc status of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosthocOutcome {
    pub constraint: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub task: Option<TaskId>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub attempt: Option<u32>,
    pub live: Status,
    pub posthoc: Status,
}

impl PosthocOutcome {
    pub fn agrees(&self) -> bool {
        self.live == self.posthoc
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PosthocRecheck {
    pub outcomes: Vec<PosthocOutcome>,
    /// Disagreements and integrity failures of preserved outputs.
    pub reports: Vec<ViolationReport>,
}

impl PosthocRecheck {
    pub fn agrees(&self) -> bool {
        self.outcomes.iter().all(PosthocOutcome::agrees) && self.reports.is_empty()
    }
}

/// One check to replay: what the live run saw and where its evidence lives.
struct Replay<'a> {
    task: &'a TaskId,
    attempt: u32,
    node: &'a NodeId,
    dir: String,
    start: Option<f64>,
    exit_code: Option<i64>,
    live_inputs: &'a BTreeMap<LabelId, FileFacts>,
    live_outputs: &'a BTreeMap<LabelId, FileFacts>,
}

fn label_value(facts: Option<&FileFacts>, name: &PropertyName) -> Option<Value> {
    Some(match (name, facts) {
        (PropertyName::FileExists, f) => Value::Bool(f.is_some()),
        (PropertyName::FolderExists, f) => Value::Bool(f.is_some_and(|f| f.is_dir)),
        (PropertyName::FileSizeBytes, Some(f)) => Value::Int(f.size_bytes as i64),
        (PropertyName::Checksum, Some(f)) => Value::Str(f.sha256.clone()),
        (PropertyName::FormatOk, Some(f)) => Value::Bool(f.format_ok),
        _ => return None,
    })
}

/// Rebuilds the observation a live check made, from stored evidence.
fn replay_observation(
    vc: &ValidityConstraint,
    live: &CheckOutcome,
    r: &Replay,
    store: &ArtifactStore,
) -> Result<Option<Observation>, String> {
    let name = &vc.lhs.name;
    match &vc.lhs.target {
        Target::Label { label, direction: Some(dir) } => {
            let (sub, recorded) = match dir {
                Direction::Incoming => ("inputs", r.live_inputs),
                Direction::Outgoing => ("outputs", r.live_outputs),
            };
            let stored = store.facts(&format!("{}/{sub}/{label}", r.dir));
            if stored.is_none() && recorded.contains_key(label) {
                return Err(format!("artifact `{}/{sub}/{label}` is missing", r.dir));
            }
            Ok(label_value(stored.as_ref(), name).map(|v| Observation::new(v).with_file(label.as_str())))
        }
        Target::Task(_) => Ok(match name {
            PropertyName::RuntimeSeconds => r.start.map(|s| Observation::new(Value::Decimal(live.timestamp - s))),
            PropertyName::ExitCode => r.exit_code.map(|c| Observation::new(Value::Int(c))),
            // Relations are not re-run; their recorded outcome stands.
            _ => live.observed.clone().map(Observation::new),
        }),
        _ => Ok(live.observed.clone().map(Observation::new)),
    }
}

fn phase_of(time: CheckTime) -> Phase {
    match time {
        CheckTime::Before => Phase::Dispatched,
        CheckTime::During => Phase::Launched,
        CheckTime::After => Phase::Completed,
    }
}

fn replay_check(daw: &LogicalDaw, vc: &ValidityConstraint, live: &CheckOutcome, r: &Replay, store: &ArtifactStore) -> Status {
    let obs = match replay_observation(vc, live, r, store) {
        Ok(o) => o,
        Err(e) => {
            log::info!("posthoc `{}`: {e}", vc.id);
            return Status::Unevaluable;
        }
    };
    let scope = Scope {
        step_index: 1,
        executed: [r.task.clone()].into(),
        incoming: daw.incoming(r.task),
        outgoing: daw.outgoing(r.task),
        node_of: [(r.task.clone(), r.node.clone())].into(),
    };
    let mut env = PropertyEnvironment::default();
    env.set_phase(r.task, phase_of(live.time));
    if let Some(o) = obs {
        match &vc.lhs.target {
            Target::Label { label, direction: Some(dir) } => {
                let deps = match dir {
                    Direction::Incoming => &scope.incoming,
                    Direction::Outgoing => &scope.outgoing,
                };
                for d in deps.iter().filter(|d| d.label == *label) {
                    env.set_dep(&d.from, &d.to, vc.lhs.name.clone(), o.clone());
                }
            }
            _ => env.set_task(r.task, vc.lhs.name.clone(), o),
        }
    }
    evaluate_dynamic(vc, &scope, &env).status
}

/// Replays static file checks against staged copies of workflow inputs.
fn replay_static(vc: &ValidityConstraint, live: &CheckOutcome, store: &ArtifactStore, staged: &[String]) -> Status {
    let Target::Label { label, .. } = &vc.lhs.target else {
        return live.status;
    };
    let suffix = format!("/inputs/{label}");
    let stored = staged.iter().find(|p| p.ends_with(&suffix)).and_then(|p| store.facts(p));
    let value = label_value(stored.as_ref(), &vc.lhs.name);
    match value {
        None => Status::Unevaluable,
        // A file seen live but never staged cannot be re-checked.
        Some(Value::Bool(false)) if live.status == Status::Holds => Status::Unevaluable,
        Some(v) => match vc.op.apply(&v, &vc.rhs) {
            Some(true) => Status::Holds,
            Some(false) => Status::Violated,
            None => Status::Unevaluable,
        },
    }
}

fn integrity_report(task: &TaskId, attempt: u32, node: &NodeId, label: &LabelId, recorded: &FileFacts, stored: Option<&FileFacts>) -> Option<ViolationReport> {
    if stored.is_some_and(|s| s.sha256 == recorded.sha256) {
        return None;
    }
    let vc = instantiate_catalog(
        CatalogName::FileFileProperties,
        CatalogParams {
            id: Some(format!("{task}/posthoc:{label}")),
            target: Some(Target::Label {
                label: label.clone(),
                direction: Some(Direction::Outgoing),
            }),
            property: Some(PropertyName::Checksum),
            op: Some(ComparisonOp::Eq),
            value: Some(Value::Str(recorded.sha256.clone())),
            ..CatalogParams::for_task(task.clone())
        },
    )
    .expect("checksum constraints are well-typed");
    let (status, observed, detail) = match stored {
        Some(s) => (
            Status::Violated,
            Some(Value::Str(s.sha256.clone())),
            format!("preserved output `{label}` differs from the live run ({} bytes live, {} now)", recorded.size_bytes, s.size_bytes),
        ),
        None => (Status::Unevaluable, None, format!("preserved output `{label}` is missing")),
    };
    let e = Evaluation {
        status,
        observed,
        task: Some(task.clone()),
        node: Some(node.clone()),
        file: Some(label.to_string()),
        detail: Some(detail),
        check_time: Some(CheckTime::After),
    };
    let mut r = ViolationReport::from_evaluation(&vc, &e, CheckPoint::Posthoc, Some(CheckTime::After), 0.0)?;
    r.attempt = Some(attempt);
    Some(r)
}

/// Re-evaluates every posthoc-capable check of a finished run from preserved
/// artifacts, then verifies that preserved outputs still match the run.
pub fn recheck(run: &RunOutcome, wf: &Desugared, store: &ArtifactStore) -> PosthocRecheck {
    let mut out = PosthocRecheck::default();
    let posthoc = |vc: &&ValidityConstraint| vc.metadata.vc_type == VcType::PosthocCapable;
    let staged: Vec<String> = store.paths().into_iter().filter(|p| p.contains("/inputs/")).collect();

    for live in &run.records.static_checks {
        if let Some(vc) = wf.static_vcs.iter().filter(posthoc).find(|vc| vc.id == live.constraint) {
            out.outcomes.push(PosthocOutcome {
                constraint: vc.id.clone(),
                task: vc.task.clone(),
                attempt: None,
                live: live.status,
                posthoc: replay_static(vc, live, store, &staged),
            });
        }
    }

    let empty = BTreeMap::new();
    let mut replays: Vec<(Replay, &[CheckOutcome])> = Vec::new();
    for (task, attempts) in &run.records.attempts {
        for a in attempts {
            replays.push((
                Replay {
                    task,
                    attempt: a.attempt,
                    node: &a.node,
                    dir: a.dir.clone().unwrap_or_else(|| format!("{task}/attempt-{}", a.attempt)),
                    start: Some(a.start),
                    exit_code: a.exit_code,
                    live_inputs: &a.inputs,
                    live_outputs: &a.outputs,
                },
                &a.checks,
            ));
        }
    }
    for d in &run.records.rejected_dispatches {
        replays.push((
            Replay {
                task: &d.task,
                attempt: d.attempt,
                node: &d.node,
                dir: d.dir.clone().unwrap_or_else(|| format!("{}/attempt-{}", d.task, d.attempt)),
                start: None,
                exit_code: None,
                live_inputs: &d.inputs,
                live_outputs: &empty,
            },
            &d.checks,
        ));
    }

    for (r, checks) in &replays {
        let vcs = wf.dynamic_vcs.get(r.task).map(Vec::as_slice).unwrap_or(&[]);
        for live in checks.iter() {
            let Some(vc) = vcs.iter().filter(posthoc).find(|vc| vc.id == live.constraint) else {
                continue;
            };
            out.outcomes.push(PosthocOutcome {
                constraint: vc.id.clone(),
                task: Some(r.task.clone()),
                attempt: Some(r.attempt),
                live: live.status,
                posthoc: replay_check(&wf.daw, vc, live, r, store),
            });
        }
        for (label, recorded) in r.live_outputs {
            let stored = store.facts(&format!("{}/outputs/{label}", r.dir));
            if let Some(rep) = integrity_report(r.task, r.attempt, r.node, label, recorded, stored.as_ref()) {
                out.reports.push(rep);
            }
        }
    }

    for o in out.outcomes.iter().filter(|o| !o.agrees()) {
        log::warn!("posthoc `{}`: live {:?}, now {:?}", o.constraint, o.live, o.posthoc);
    }
    out
}

impl PosthocRecheck {
    /// Reports whose verdict changed from the live run, by constraint.
    pub fn disagreements(&self) -> impl Iterator<Item = &PosthocOutcome> {
        self.outcomes.iter().filter(|o| !o.agrees())
    }
}
