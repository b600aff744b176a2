//! Validity constraints: representation, classification and evaluation.
//!
//! A constraint compares one registry property of a task, a dependency label
//! or a node against a constant. Static constraints are evaluated once over
//! the workflow and cluster; dynamic constraints are evaluated over the scope
//! of each execution step.

pub mod catalog;
pub mod env;
pub mod eval;
pub mod registry;
pub mod report;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use catalog::{
    classify, instantiate_catalog, AffectedObject, CatalogEntry, CatalogName, CatalogParams,
    CheckTime, Component, Recoverable, Severity, VcMetadata, VcType, CATALOG,
};
pub use env::{Observation, Phase, PropertyEnvironment};
pub use eval::{
    check_execution, check_setup, compute_scope, evaluate_dynamic, evaluate_static, Evaluation,
    ExecutionVerdict, Scope, ScopeError, SetupVerdict, Status, StepVerdict,
};
pub use registry::{Block, PropertyName, TargetKind};
pub use report::{CheckPoint, RecoveryAction, RecoveryRecord, Verdict, ViolationReport};

use crate::ids::{LabelId, NodeId, TaskId};
use crate::lang::ContractClause;
use crate::value::{ComparisonOp, Value};

/// Which side of a task a dependency label is read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Incoming,
    Outgoing,
}

/// Node selection of a node-targeted property.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeSel {
    Id(NodeId),
    /// The node the schedule assigns to the task, `C(s,t)`.
    ScheduledNodeOf(TaskId),
    /// Every node of the cluster, folded by a quantifier.
    Cluster,
}

/// The object a property is read from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Task(TaskId),
    /// A dependency label. Without a direction the label names workflow data
    /// read before execution (static constraints).
    Label {
        label: LabelId,
        direction: Option<Direction>,
    },
    Node(NodeSel),
}

impl Target {
    pub fn kind(&self) -> TargetKind {
        match self {
            Target::Task(_) => TargetKind::Task,
            Target::Label { .. } => TargetKind::Label,
            Target::Node(_) => TargetKind::Node,
        }
    }

    pub fn task(&self) -> Option<&TaskId> {
        match self {
            Target::Task(t) | Target::Node(NodeSel::ScheduledNodeOf(t)) => Some(t),
            _ => None,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Task(t) => write!(f, "task({t})"),
            Target::Label { label, direction: Some(Direction::Incoming) } => write!(f, "input({label})"),
            Target::Label { label, direction: Some(Direction::Outgoing) } => write!(f, "output({label})"),
            Target::Label { label, direction: None } => write!(f, "data({label})"),
            Target::Node(NodeSel::Id(n)) => write!(f, "node({n})"),
            Target::Node(NodeSel::ScheduledNodeOf(t)) => write!(f, "node_of({t})"),
            Target::Node(NodeSel::Cluster) => f.write_str("cluster"),
        }
    }
}

/// A property of a target.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PropertyRef {
    pub target: Target,
    pub name: PropertyName,
}

impl fmt::Display for PropertyRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.target, self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VcKind {
    Static,
    Dynamic,
}

/// How a node-targeted static constraint folds over the cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantifier {
    AtLeastOneNode,
    AllNodes,
}

impl fmt::Display for Quantifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quantifier::AtLeastOneNode => "at_least_one_node",
            Quantifier::AllNodes => "all_nodes",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VcError {
    #[error("property `{property}` cannot be read from a {kind:?} target")]
    WrongTarget { property: PropertyName, kind: TargetKind },
    #[error("property `{property}` does not accept a {found} constant")]
    TypeMismatch {
        property: PropertyName,
        found: crate::value::ValueType,
    },
    #[error("boolean property `{0}` only supports `=`")]
    BooleanOrdering(PropertyName),
    #[error("static constraint `{0}` references a step-dependent target")]
    StepDependentTarget(String),
    #[error("dynamic constraint `{0}` references a target outside any step scope")]
    UnscopedTarget(String),
    #[error("{0}")]
    Schema(String),
}

/// A constraint `property ⊡ constant` with its classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityConstraint {
    pub id: String,
    pub kind: VcKind,
    pub lhs: PropertyRef,
    pub op: ComparisonOp,
    pub rhs: Value,
    pub quantifier: Option<Quantifier>,
    pub metadata: VcMetadata,
    pub entry: CatalogName,
    /// Task the constraint is attached to.
    pub task: Option<TaskId>,
    /// Contract clause whose outcome the constraint reads, for clause-backed constraints.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clause: Option<ContractClause>,
}

impl ValidityConstraint {
    /// Checks the typing and scoping invariants.
    pub fn validate(&self) -> Result<(), VcError> {
        let kind = self.lhs.target.kind();
        if !self.lhs.name.allows(kind) {
            return Err(VcError::WrongTarget {
                property: self.lhs.name.clone(),
                kind,
            });
        }
        if !self.lhs.name.accepts(self.rhs.value_type()) {
            return Err(VcError::TypeMismatch {
                property: self.lhs.name.clone(),
                found: self.rhs.value_type(),
            });
        }
        if (self.lhs.name.is_boolean() || matches!(self.rhs, Value::Bool(_)))
            && self.op != ComparisonOp::Eq
        {
            return Err(VcError::BooleanOrdering(self.lhs.name.clone()));
        }
        match self.kind {
            VcKind::Static => match &self.lhs.target {
                Target::Node(NodeSel::ScheduledNodeOf(_)) | Target::Label { direction: Some(_), .. } => {
                    Err(VcError::StepDependentTarget(self.id.clone()))
                }
                _ => Ok(()),
            },
            VcKind::Dynamic => match &self.lhs.target {
                Target::Node(NodeSel::Cluster) | Target::Label { direction: None, .. } => {
                    Err(VcError::UnscopedTarget(self.id.clone()))
                }
                _ => Ok(()),
            },
        }
    }

    pub fn is_hard(&self) -> bool {
        self.metadata.is_hard()
    }

    /// `lhs ⊡ rhs` in surface notation.
    pub fn formula(&self) -> String {
        let mut s = format!("{} {} {}", self.lhs, self.op, self.rhs);
        if let Some(q) = self.quantifier {
            s.push_str(&format!(" [{q}]"));
        }
        s
    }
}

impl fmt::Display for ValidityConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.formula(), self.entry)
    }
}
