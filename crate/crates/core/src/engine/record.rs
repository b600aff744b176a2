use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::constraint::{CheckTime, Component, Status};
use crate::ids::{LabelId, NodeId, TaskId};
use crate::value::Value;

/// Facts about one file or directory, as the checks saw it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileFacts {
    pub size_bytes: u64,
    pub sha256: String,
    pub format_ok: bool,
    pub is_dir: bool,
}

/// Outcome of one constraint at one check point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub constraint: String,
    pub time: CheckTime,
    pub status: Status,
    pub observed: Option<Value>,
    pub timestamp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttemptOutcome {
    /// The command ran to completion (any exit status).
    Completed,
    /// Killed by the engine after a during-check failed.
    Killed,
    /// Its node crashed under it.
    Lost,
    /// The command could not be started.
    SpawnFailed,
    /// Killed because the workflow aborted.
    Cancelled,
}

/// One launched attempt of a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    /// Dispatch number of the task, counting rejected dispatches too.
    pub attempt: u32,
    pub node: NodeId,
    pub start: f64,
    pub end: Option<f64>,
    pub outcome: Option<AttemptOutcome>,
    pub exit_code: Option<i64>,
    /// Sandbox directory of the attempt, relative to the sandbox root.
    pub dir: Option<String>,
    pub stdout: Option<String>,
    pub stderr: Option<String>,
    /// Peak memory: exact in simulation, sampled in real mode.
    pub peak_memory_bytes: Option<u64>,
    pub checks: Vec<CheckOutcome>,
    pub inputs: BTreeMap<LabelId, FileFacts>,
    pub outputs: BTreeMap<LabelId, FileFacts>,
}

impl AttemptRecord {
    pub fn runtime(&self) -> Option<f64> {
        self.end.map(|e| e - self.start)
    }
}

/// A dispatch stopped by a failed before-check; the command never started.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedDispatch {
    pub task: TaskId,
    pub attempt: u32,
    pub node: NodeId,
    pub time: f64,
    pub dir: Option<String>,
    pub checks: Vec<CheckOutcome>,
    pub inputs: BTreeMap<LabelId, FileFacts>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// Outcomes of the static constraints, checked before execution.
    #[serde(default)]
    pub static_checks: Vec<CheckOutcome>,
    pub attempts: BTreeMap<TaskId, Vec<AttemptRecord>>,
    pub rejected_dispatches: Vec<RejectedDispatch>,
}

impl RunRecord {
    pub fn attempt_count(&self) -> usize {
        self.attempts.values().map(Vec::len).sum()
    }

    pub fn launched(&self, task: &TaskId) -> bool {
        self.attempts.get(task).is_some_and(|a| !a.is_empty())
    }

    /// Compute-seconds spent over all attempts.
    pub fn spend(&self) -> f64 {
        self.attempts.values().flatten().filter_map(AttemptRecord::runtime).fold(0.0, |a, b| a + b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Correct,
    /// A task failed without any constraint attributing the failure.
    TaskFailed { task: TaskId },
    /// A hard static constraint failed; nothing ran.
    AbortedStatic,
    /// A hard dynamic constraint failed.
    Failed { first_erroneous_step: usize },
    /// No node could host a task.
    PlanningFailed { reason: String },
}

impl RunStatus {
    /// The process exit code of this outcome.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunStatus::Correct => 0,
            RunStatus::TaskFailed { .. } => 1,
            RunStatus::AbortedStatic | RunStatus::PlanningFailed { .. } => 2,
            RunStatus::Failed { .. } => 3,
        }
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunStatus::Correct => f.write_str("correct"),
            RunStatus::TaskFailed { task } => write!(f, "failed: task `{task}` failed"),
            RunStatus::AbortedStatic => f.write_str("aborted before execution: the setup is not correct"),
            RunStatus::Failed { first_erroneous_step } => {
                write!(f, "failed: first erroneous step is {first_erroneous_step}")
            }
            RunStatus::PlanningFailed { reason } => write!(f, "planning failed: {reason}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    StaticCheck,
    Planned,
    Dispatch,
    AdmissionWait,
    BeforeCheckFailed,
    Launch,
    SpawnFailed,
    DuringCheckFailed,
    Kill,
    Exit,
    AfterCheckFailed,
    TaskFailed,
    Warning,
    Retry,
    Reschedule,
    Abort,
    Step,
    NodeCrash,
    NodeRecover,
    NodeDead,
    NodeAlive,
    LicenseRevoke,
    FileCorrupt,
    Finish,
}

/// One line of the structured event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineEvent {
    pub timestamp: f64,
    pub component: Component,
    pub kind: EventKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attempt: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(RunStatus::Correct.exit_code(), 0);
        assert_eq!(RunStatus::TaskFailed { task: "t".into() }.exit_code(), 1);
        assert_eq!(RunStatus::AbortedStatic.exit_code(), 2);
        assert_eq!(RunStatus::Failed { first_erroneous_step: 2 }.exit_code(), 3);
    }

    #[test]
    fn status_serializes_with_tag() {
        let s = serde_json::to_string(&RunStatus::Failed { first_erroneous_step: 3 }).unwrap();
        assert_eq!(s, r#"{"status":"failed","first_erroneous_step":3}"#);
    }
}
