use serde::{Deserialize, Serialize};

use crate::ids::LabelId;

/// Simulated behaviour of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimProfile {
    pub nominal_runtime_s: f64,
    pub memory_use_bytes: u64,
    #[serde(default)]
    pub exit_code: i64,
    /// Text the task writes to stderr.
    #[serde(default)]
    pub stderr: Option<String>,
    /// Whether the task rewrites its inputs.
    #[serde(default)]
    pub mutates_inputs: bool,
    #[serde(default)]
    pub outputs: Vec<SimOutput>,
}

impl Default for SimProfile {
    fn default() -> Self {
        SimProfile {
            nominal_runtime_s: 0.0,
            memory_use_bytes: 0,
            exit_code: 0,
            stderr: None,
            mutates_inputs: false,
            outputs: Vec::new(),
        }
    }
}

/// Default size of an output the profile does not describe.
pub const DEFAULT_OUTPUT_BYTES: u64 = 1024;

/// One simulated output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimOutput {
    pub path: LabelId,
    pub size_bytes: u64,
    /// Tag naming the generator of the file's content.
    #[serde(default)]
    pub content: Option<String>,
    #[serde(default)]
    pub corrupt: bool,
    #[serde(default)]
    pub empty: bool,
    /// The task does not write this output at all.
    #[serde(default)]
    pub missing: bool,
}

impl SimOutput {
    pub fn new(path: impl Into<LabelId>) -> Self {
        SimOutput {
            path: path.into(),
            size_bytes: DEFAULT_OUTPUT_BYTES,
            content: None,
            corrupt: false,
            empty: false,
            missing: false,
        }
    }

    pub fn effective_size(&self) -> u64 {
        if self.empty {
            0
        } else {
            self.size_bytes
        }
    }
}

impl SimProfile {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.nominal_runtime_s >= 0.0 && self.nominal_runtime_s.is_finite()) {
            return Err(format!("runtime must be a finite nonnegative number, got {}", self.nominal_runtime_s));
        }
        Ok(())
    }

    /// The output spec for `label`, or the default one.
    pub fn output(&self, label: &LabelId) -> SimOutput {
        self.outputs
            .iter()
            .find(|o| o.path == *label)
            .cloned()
            .unwrap_or_else(|| SimOutput::new(label.clone()))
    }
}
