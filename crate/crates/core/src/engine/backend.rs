use std::path::PathBuf;

use super::config::Mode;
use super::observe::Evidence;
use crate::constraint::PropertyEnvironment;
use crate::daw::{ClusterSpec, TaskDef};
use crate::ids::{LabelId, NodeId, TaskId};
use crate::lang::Desugared;

/// How a launch went.
pub(crate) enum Launch {
    /// Completion at a known time (simulation).
    At { finish_at: f64, exit_code: i64, peak_memory: u64 },
    /// Completion is reported later through [`Backend::wait`].
    Spawned,
    Failed(String),
}

/// A task attempt that ended on its own.
pub(crate) struct Completion {
    pub task: TaskId,
    pub attempt: u32,
    pub exit_code: Option<i64>,
    pub peak_memory: Option<u64>,
}

/// Where task attempts actually run.
pub(crate) trait Backend: Evidence {
    fn mode(&self) -> Mode;
    /// Seconds since the run started, for backends driven by the wall clock.
    fn wall_now(&self) -> Option<f64>;
    /// Blocks until an attempt completes or the deadline passes.
    fn wait(&mut self, deadline: Option<f64>) -> Option<Completion>;
    /// Sets up the attempt's sandbox; returns its directory relative to the sandbox root.
    fn prepare(&mut self, task: &TaskDef, attempt: u32, node: &NodeId) -> Result<Option<String>, String>;
    fn launch(&mut self, task: &TaskDef, attempt: u32, node: &NodeId, now: f64) -> Launch;
    fn kill(&mut self, task: &TaskId, attempt: u32);
    /// Publishes the attempt's outputs to consumers.
    fn collect(&mut self, task: &TaskDef, attempt: u32) -> Result<(), String>;
    /// Evidence for static constraints: workflow data before anything runs.
    fn static_env(&mut self, wf: &Desugared, cluster: &ClusterSpec) -> PropertyEnvironment;
    fn corrupt(&mut self, label: &LabelId);
    fn sample_memory(&mut self, task: &TaskId, attempt: u32) -> Option<u64>;
    /// stdout and stderr locations of an attempt, relative to the sandbox root.
    fn log_paths(&self, task: &TaskId, attempt: u32) -> (Option<String>, Option<String>);
    /// Copies the final outputs out and cleans up; returns the kept sandbox root.
    fn finish(&mut self, final_outputs: &[LabelId]) -> Result<Option<PathBuf>, String>;
}
