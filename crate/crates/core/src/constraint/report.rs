//! Violation reports.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::catalog::{CatalogName, CheckTime, Component, VcMetadata};
use super::eval::{Evaluation, Status};
use super::ValidityConstraint;
use crate::ids::{NodeId, TaskId};
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// A hard constraint evaluated to false.
    Violated,
    /// A soft constraint evaluated to false; execution continued.
    Warned,
    /// The constraint failed but a later recovery action succeeded.
    Recovered,
    /// The constraint could not be evaluated; treated as a hard configuration error.
    Unevaluable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Violated => "violated",
            Verdict::Warned => "warned",
            Verdict::Recovered => "recovered",
            Verdict::Unevaluable => "unevaluable",
        })
    }
}

/// Where in the run a check happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "at", content = "step")]
pub enum CheckPoint {
    PreExecution,
    Step(usize),
    Posthoc,
}

impl fmt::Display for CheckPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckPoint::PreExecution => f.write_str("pre-execution"),
            CheckPoint::Step(s) => write!(f, "step {s}"),
            CheckPoint::Posthoc => f.write_str("posthoc"),
        }
    }
}

/// Reaction to a failed constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryAction {
    RetrySameNode,
    RescheduleOtherNode,
    AbortWorkflow,
    WarnOnly,
}

impl fmt::Display for RecoveryAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecoveryAction::RetrySameNode => "retry on the same node",
            RecoveryAction::RescheduleOtherNode => "reschedule on another node",
            RecoveryAction::AbortWorkflow => "abort the workflow",
            RecoveryAction::WarnOnly => "warn only",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRecord {
    pub action: RecoveryAction,
    pub outcome: String,
}

/// One failed (or unevaluable) constraint check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub constraint: String,
    pub entry: CatalogName,
    pub metadata: VcMetadata,
    pub formula: String,
    pub verdict: Verdict,
    pub at: CheckPoint,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub check_time: Option<CheckTime>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub task: Option<TaskId>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub node: Option<NodeId>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub observed: Option<Value>,
    pub bound: Value,
    pub component: Component,
    pub timestamp: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub attempt: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detail: Option<String>,
    #[serde(default)]
    pub recovery: Vec<RecoveryRecord>,
}

impl ViolationReport {
    /// Builds a report from a failed evaluation. `None` when the evaluation passed.
    pub fn from_evaluation(
        vc: &ValidityConstraint,
        eval: &Evaluation,
        at: CheckPoint,
        check_time: Option<CheckTime>,
        timestamp: f64,
    ) -> Option<ViolationReport> {
        let verdict = match eval.status {
            Status::Holds | Status::NotApplicable => return None,
            Status::Unevaluable => Verdict::Unevaluable,
            Status::Violated if vc.is_hard() => Verdict::Violated,
            Status::Violated => Verdict::Warned,
        };
        let task = eval.task.clone().or_else(|| vc.task.clone());
        let mut report = ViolationReport {
            constraint: vc.id.clone(),
            entry: vc.entry,
            metadata: vc.metadata.clone(),
            formula: vc.formula(),
            verdict,
            at,
            check_time,
            task,
            node: eval.node.clone(),
            file: eval.file.clone(),
            observed: eval.observed.clone(),
            bound: vc.rhs.clone(),
            component: vc.metadata.responsible(check_time),
            timestamp,
            attempt: None,
            detail: eval.detail.clone(),
            recovery: Vec::new(),
        };
        if report.task.is_none() && report.node.is_none() && report.file.is_none() {
            // Every report implicates at least one object; fall back to the target text.
            report.file = Some(vc.lhs.target.to_string());
        }
        Some(report)
    }

    /// Hard violations and unevaluable checks stop execution.
    pub fn is_fatal(&self) -> bool {
        matches!(self.verdict, Verdict::Violated | Verdict::Unevaluable)
    }

    pub fn implicated(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(t) = &self.task {
            out.push(format!("task `{t}`"));
        }
        if let Some(n) = &self.node {
            out.push(format!("node `{n}`"));
        }
        if let Some(f) = &self.file {
            out.push(format!("file `{f}`"));
        }
        out
    }
}
