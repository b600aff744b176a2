//! The execution engine: planning, dispatch, constraint checks and recovery.
//!
//! One coordinator drives every run. It talks to a backend that either runs
//! real processes in per-attempt sandboxes or simulates them on a
//! discrete-event clock.

mod backend;
pub mod config;
mod coordinator;
pub mod explain;
mod observe;
pub mod plan;
pub mod posthoc;
mod real;
pub mod record;
pub mod recovery;

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{cluster_from_toml, local_cluster, ConfigError, EngineConfig, Mode, RetryPolicy, SchedulerPolicy};
pub use explain::explain;
pub use plan::{alternative_node, plan, plan_lenient, PlanError};
pub use posthoc::{recheck, ArtifactStore, PosthocRecheck};
pub use record::{
    AttemptOutcome, AttemptRecord, CheckOutcome, EngineEvent, EventKind, FileFacts, RejectedDispatch, RunRecord,
    RunStatus,
};
pub use recovery::choose_recovery;

use crate::constraint::ViolationReport;
use crate::daw::{ClusterSpec, ExecutionTrace, Schedule};
use crate::lang::Desugared;
use crate::sim::{FaultScript, SavingsReport};

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub workflow: String,
    pub mode: Mode,
    pub status: RunStatus,
    pub exit_code: i32,
    pub schedule: Schedule,
    pub trace: ExecutionTrace,
    pub records: RunRecord,
    pub reports: Vec<ViolationReport>,
    /// Written separately as JSON lines.
    #[serde(skip)]
    pub events: Vec<EngineEvent>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub savings: Option<SavingsReport>,
    /// The sandbox root, when it was kept.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sandbox: Option<PathBuf>,
}

impl RunOutcome {
    /// Writes the event log as one JSON object per line.
    pub fn write_events(&self, w: &mut impl Write) -> std::io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut *w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save_events(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_events(&mut f)?;
        f.flush()
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("sandbox: {0}")]
    Sandbox(String),
    #[error("invalid fault script: {0}")]
    Faults(#[from] crate::sim::FaultError),
    #[error("task `{0}` has a command but no simulation profile")]
    MissingProfile(crate::ids::TaskId),
    #[error("task `{0}`: invalid simulation profile: {1}")]
    BadProfile(crate::ids::TaskId, String),
    #[error("cannot write the event log: {0}")]
    EventLog(std::io::Error),
}

/// Runs a workflow with real processes.
///
/// `workflow_dir` is where workflow inputs are read from unless the
/// configuration names a data directory.
pub fn execute(wf: &Desugared, cluster: &ClusterSpec, config: &EngineConfig, workflow_dir: &Path) -> Result<RunOutcome, EngineError> {
    config.validate()?;
    let backend = real::RealBackend::new(wf, config, workflow_dir).map_err(EngineError::Sandbox)?;
    let outcome = Coordinator::new(wf, cluster, config, backend).run(None, &FaultScript::default());
    write_log(config, &outcome)?;
    Ok(outcome)
}

/// Runs a workflow in the mode its configuration selects.
pub fn run(wf: &Desugared, cluster: &ClusterSpec, config: &EngineConfig, workflow_dir: &Path, faults: &FaultScript) -> Result<RunOutcome, EngineError> {
    match config.mode {
        Mode::Real => execute(wf, cluster, config, workflow_dir),
        Mode::Simulated => crate::sim::simulate(wf, cluster, config, faults),
    }
}

/// Runs only the static checks and planning, without executing anything.
///
/// In real mode workflow inputs are read from disk; in simulated mode from
/// the nodes' declared files.
pub fn validate(wf: &Desugared, cluster: &ClusterSpec, config: &EngineConfig, workflow_dir: &Path) -> Result<RunOutcome, EngineError> {
    config.validate()?;
    let config = EngineConfig {
        static_checks: true,
        keep_sandbox: false,
        output_dir: None,
        ..config.clone()
    };
    Ok(match config.mode {
        Mode::Real => {
            let backend = real::RealBackend::new(wf, &config, workflow_dir).map_err(EngineError::Sandbox)?;
            Coordinator::new(wf, cluster, &config, backend).setup_only().run(None, &FaultScript::default())
        }
        Mode::Simulated => {
            let backend = crate::sim::SimBackend::new(wf, cluster, &config, &FaultScript::default());
            Coordinator::new(wf, cluster, &config, backend).setup_only().run(None, &FaultScript::default())
        }
    })
}

pub(crate) fn write_log(config: &EngineConfig, outcome: &RunOutcome) -> Result<(), EngineError> {
    if let Some(p) = &config.event_log {
        outcome.save_events(p).map_err(EngineError::EventLog)?;
    }
    Ok(())
}

pub(crate) use backend::{Backend, Completion, Launch};
pub(crate) use coordinator::Coordinator;
pub(crate) use observe::{CheckCtx, Evidence, ProbeRun};
