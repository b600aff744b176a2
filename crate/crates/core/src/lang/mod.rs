//! The workflow specification language.
//!
//! A `.vcw` document declares tasks, their data dependencies, workflow
//! parameters, workflow-level static requirements, and per-task `require` /
//! `promise` contracts. [`parse`] builds a [`WorkflowDocument`],
//! [`desugar`] lowers it onto a [`LogicalDaw`](crate::daw::LogicalDaw) plus
//! validity constraints, [`serialize`] prints it back, and [`lint`] flags
//! suspicious contracts. The grammar is documented in `docs/language.md`.

mod desugar;
mod lexer;
mod lint;
mod parser;
mod serialize;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use desugar::{desugar, interpolate, shell_quote, synthetic_label, template_variables, DesugarError, Desugared};
pub use lexer::{LexError, Span};
pub use lint::{lint, LintWarning};
pub use parser::{parse, ParseError};
pub use serialize::serialize;
pub(crate) use desugar::contract_target as resolve_target;
pub(crate) use serialize::clause as clause_text;

use crate::constraint::{PropertyName, Quantifier, Severity};
use crate::daw::ResourceVector;
use crate::ids::{LabelId, NodeId, TaskId};
use crate::sim::SimProfile;
use crate::value::{ComparisonOp, Value};

/// Where an atom reads its property from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomTarget {
    /// The task the contract belongs to (`task`), or a named task in workflow requirements (`task(t)`).
    Task(Option<TaskId>),
    /// The node the task is scheduled on (`node`).
    ScheduledNode,
    /// A named node (`node(n)`).
    Node(NodeId),
    /// Every node of the cluster (`cluster`).
    Cluster,
    Input(LabelId),
    Output(LabelId),
    /// Workflow data before execution (`data(l)`).
    Data(LabelId),
}

/// `target.property ⊡ constant`, with optional quantifier and severity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub target: AtomTarget,
    pub property: PropertyName,
    pub op: ComparisonOp,
    pub value: Value,
    pub quantifier: Option<Quantifier>,
    pub severity: Option<Severity>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailAction {
    Fail,
    Warn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    /// Exit status 0 and nothing but whitespace on stderr.
    CommandLoggedNoError,
    /// Input digests after the task equal those taken before it.
    InputsNotChanged,
}

impl Builtin {
    pub fn keyword(self) -> &'static str {
        match self {
            Builtin::CommandLoggedNoError => "COMMAND_LOGGED_NO_ERROR",
            Builtin::InputsNotChanged => "INPUTS_NOT_CHANGED",
        }
    }
}

/// One clause of a `require` or `promise` block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractClause {
    Atom(Atom),
    /// Holds when `body` holds for every file matching `pattern`, bound to `binder`.
    ForAll {
        binder: String,
        pattern: String,
        body: Box<ContractClause>,
    },
    /// Holds unless `condition` holds; `warn` makes the failure soft.
    IfThen {
        condition: Box<ContractClause>,
        action: FailAction,
    },
    /// A shell command; exit status 0 means the clause holds.
    ShellProbe { command: String },
    Builtin(Builtin),
}

impl ContractClause {
    /// Shell probes reachable from this clause.
    pub fn probes(&self) -> Vec<&str> {
        match self {
            ContractClause::ShellProbe { command } => vec![command.as_str()],
            ContractClause::ForAll { body, .. } => body.probes(),
            ContractClause::IfThen { condition, .. } => condition.probes(),
            _ => Vec::new(),
        }
    }

    /// Atoms nested anywhere in this clause, including itself.
    pub fn atoms(&self) -> Vec<&Atom> {
        match self {
            ContractClause::Atom(a) => vec![a],
            ContractClause::ForAll { body, .. } => body.atoms(),
            ContractClause::IfThen { condition, .. } => condition.atoms(),
            _ => Vec::new(),
        }
    }
}

/// Requirements checked before a task starts and promises checked after it ends.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContractSet {
    pub requires: Vec<ContractClause>,
    pub promises: Vec<ContractClause>,
}

impl ContractSet {
    pub fn is_empty(&self) -> bool {
        self.requires.is_empty() && self.promises.is_empty()
    }
}

/// A workflow parameter with its default and range bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDef {
    pub name: String,
    pub default: Value,
    pub range: Vec<(ComparisonOp, Value)>,
    pub span: Span,
}

/// A `task ID { ... }` block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskBlock {
    pub id: TaskId,
    pub command: Option<String>,
    pub inputs: Vec<LabelId>,
    pub outputs: Vec<LabelId>,
    pub resources: ResourceVector,
    pub max_runtime: Option<f64>,
    pub params: BTreeMap<String, Value>,
    pub sim: Option<SimProfile>,
    /// `None` when the block was absent, as opposed to present and empty.
    pub require: Option<Vec<ContractClause>>,
    pub promise: Option<Vec<ContractClause>>,
    pub span: Span,
}

impl TaskBlock {
    pub fn new(id: impl Into<TaskId>) -> Self {
        TaskBlock {
            id: id.into(),
            command: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            resources: ResourceVector::default(),
            max_runtime: None,
            params: BTreeMap::new(),
            sim: None,
            require: None,
            promise: None,
            span: Span::default(),
        }
    }

    pub fn contracts(&self) -> ContractSet {
        ContractSet {
            requires: self.require.clone().unwrap_or_default(),
            promises: self.promise.clone().unwrap_or_default(),
        }
    }
}

/// `dep LABEL: FROM -> TO`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepDecl {
    pub label: LabelId,
    pub from: TaskId,
    pub to: TaskId,
    pub span: Span,
}

/// A parsed `.vcw` document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowDocument {
    pub name: String,
    pub params: Vec<ParamDef>,
    /// Workflow-level static requirements.
    pub requires: Vec<Atom>,
    pub tasks: Vec<TaskBlock>,
    pub deps: Vec<DepDecl>,
    pub span: Span,
}

impl WorkflowDocument {
    pub fn new(name: impl Into<String>) -> Self {
        WorkflowDocument {
            name: name.into(),
            params: Vec::new(),
            requires: Vec::new(),
            tasks: Vec::new(),
            deps: Vec::new(),
            span: Span::default(),
        }
    }

    pub fn task(&self, id: &TaskId) -> Option<&TaskBlock> {
        self.tasks.iter().find(|t| t.id == *id)
    }
}

impl fmt::Display for AtomTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AtomTarget::Task(None) => f.write_str("task"),
            AtomTarget::Task(Some(t)) => write!(f, "task({})", serialize::word(t.as_str())),
            AtomTarget::ScheduledNode => f.write_str("node"),
            AtomTarget::Node(n) => write!(f, "node({})", serialize::word(n.as_str())),
            AtomTarget::Cluster => f.write_str("cluster"),
            AtomTarget::Input(l) => write!(f, "input({})", serialize::word(l.as_str())),
            AtomTarget::Output(l) => write!(f, "output({})", serialize::word(l.as_str())),
            AtomTarget::Data(l) => write!(f, "data({})", serialize::word(l.as_str())),
        }
    }
}
