use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::SimClock;
use crate::ids::{LabelId, NodeId, TaskId};

/// One scripted fault.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FaultEvent {
    NodeCrash { node: NodeId, at: f64 },
    NodeRecover { node: NodeId, at: f64 },
    /// Multiplies every attempt's runtime of `task`.
    Straggle { task: TaskId, factor: f64 },
    /// Corrupts `label` at `at`, or as soon as it is written afterwards.
    FileCorrupt {
        label: LabelId,
        #[serde(default)]
        at: f64,
    },
    LicenseRevoke { name: String, at: f64 },
}

impl FaultEvent {
    /// Sim time of a timed fault; stragglers are not timed.
    pub fn at(&self) -> Option<f64> {
        match self {
            FaultEvent::NodeCrash { at, .. }
            | FaultEvent::NodeRecover { at, .. }
            | FaultEvent::FileCorrupt { at, .. }
            | FaultEvent::LicenseRevoke { at, .. } => Some(*at),
            FaultEvent::Straggle { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultScript {
    #[serde(default)]
    pub events: Vec<FaultEvent>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FaultError {
    #[error("invalid fault script: {0}")]
    Parse(String),
    #[error("fault {index}: time {at} must be finite and nonnegative")]
    BadTime { index: usize, at: f64 },
    #[error("fault {index}: time {at} is earlier than the previous fault at {previous}")]
    Unordered { index: usize, at: f64, previous: f64 },
    #[error("fault {index}: straggle factor {factor} must be at least 1")]
    BadFactor { index: usize, factor: f64 },
}

impl FaultScript {
    pub fn from_toml(text: &str) -> Result<FaultScript, FaultError> {
        let script: FaultScript = toml::from_str(text).map_err(|e| FaultError::Parse(e.to_string()))?;
        script.validate()?;
        Ok(script)
    }

    pub fn validate(&self) -> Result<(), FaultError> {
        let mut previous = 0.0f64;
        for (index, e) in self.events.iter().enumerate() {
            if let FaultEvent::Straggle { factor, .. } = e {
                if !(*factor >= 1.0 && factor.is_finite()) {
                    return Err(FaultError::BadFactor { index, factor: *factor });
                }
            }
            if let Some(at) = e.at() {
                if !(at >= 0.0 && at.is_finite()) {
                    return Err(FaultError::BadTime { index, at });
                }
                if at < previous {
                    return Err(FaultError::Unordered { index, at, previous });
                }
                previous = at;
            }
        }
        Ok(())
    }

    /// Combined runtime multiplier of `task`.
    pub fn straggle_factor(&self, task: &TaskId) -> f64 {
        self.events
            .iter()
            .filter_map(|e| match e {
                FaultEvent::Straggle { task: t, factor } if t == task => Some(*factor),
                _ => None,
            })
            .product()
    }
}

/// Queue rank of fault events: after completions, before engine timers.
pub const FAULT_RANK: u8 = 1;

/// Schedules every timed fault on `clock`; returns how many were scheduled.
pub fn inject<E>(faults: &FaultScript, clock: &mut SimClock<E>, wrap: impl Fn(FaultEvent) -> E) -> usize {
    let mut n = 0;
    for e in &faults.events {
        if let Some(at) = e.at() {
            clock.schedule(at, FAULT_RANK, wrap(e.clone()));
            n += 1;
        }
    }
    n
}
