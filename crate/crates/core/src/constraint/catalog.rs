//! The builtin catalog of validity constraints and their classification.
//!
//! Each of the thirteen entries carries its default classification along six
//! dimensions: severity, affected object, type, time of check, responsible
//! component, and recoverability.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::registry::{PropertyName, TargetKind};
use super::{NodeSel, PropertyRef, Quantifier, Target, ValidityConstraint, VcError, VcKind};
use crate::ids::TaskId;
use crate::value::{ComparisonOp, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Hard,
    Soft,
    /// Catalog-only: the entry may be instantiated as either.
    Both,
}

impl Severity {
    pub fn code(self) -> &'static str {
        match self {
            Severity::Hard => "h",
            Severity::Soft => "s",
            Severity::Both => "b",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Hard => "hard",
            Severity::Soft => "soft",
            Severity::Both => "both",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AffectedObject {
    Setup,
    Task,
    File,
}

impl fmt::Display for AffectedObject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AffectedObject::Setup => "setup",
            AffectedObject::Task => "task",
            AffectedObject::File => "file",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VcType {
    Static,
    Dynamic,
    /// Checked live and re-checkable after the run from preserved evidence.
    PosthocCapable,
}

impl VcType {
    pub fn code(self) -> &'static str {
        match self {
            VcType::Static => "s",
            VcType::Dynamic => "d",
            VcType::PosthocCapable => "d/p",
        }
    }
}

impl fmt::Display for VcType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VcType::Static => "static",
            VcType::Dynamic => "dynamic",
            VcType::PosthocCapable => "dynamic/posthoc",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckTime {
    Before,
    During,
    After,
}

impl fmt::Display for CheckTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckTime::Before => "before",
            CheckTime::During => "during",
            CheckTime::After => "after",
        })
    }
}

/// Architecture component responsible for a check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Component {
    /// Execution engine.
    EE,
    /// Scheduler.
    S,
    /// Resource manager.
    RM,
    /// Monitoring.
    M,
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Component::EE => "EE",
            Component::S => "S",
            Component::RM => "RM",
            Component::M => "M",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Recoverable {
    Yes,
    No,
    Maybe,
}

impl Recoverable {
    pub fn symbol(self) -> &'static str {
        match self {
            Recoverable::Yes => "+",
            Recoverable::No => "-",
            Recoverable::Maybe => "±",
        }
    }
}

impl fmt::Display for Recoverable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Recoverable::Yes => "yes",
            Recoverable::No => "no",
            Recoverable::Maybe => "maybe",
        })
    }
}

/// Classification of a constraint along the six dimensions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VcMetadata {
    pub severity: Severity,
    pub affected_object: AffectedObject,
    pub vc_type: VcType,
    pub time_of_check: Vec<CheckTime>,
    pub component: Vec<Component>,
    pub recoverable: Recoverable,
}

impl VcMetadata {
    pub fn checks_at(&self, t: CheckTime) -> bool {
        self.time_of_check.contains(&t)
    }

    pub fn is_hard(&self) -> bool {
        self.severity != Severity::Soft
    }

    /// Discrete (before/after) versus continuous (during) checking.
    pub fn discreteness(&self) -> &'static str {
        if self.checks_at(CheckTime::During) {
            "continuous"
        } else {
            "discrete"
        }
    }

    /// The component that acts on a check at `time`.
    pub fn responsible(&self, time: Option<CheckTime>) -> Component {
        let prefer: &[Component] = match time {
            Some(CheckTime::During) => &[Component::M, Component::S, Component::EE, Component::RM],
            Some(CheckTime::Before) => &[Component::EE, Component::RM, Component::S, Component::M],
            Some(CheckTime::After) | None => &[Component::EE, Component::S, Component::RM, Component::M],
        };
        prefer
            .iter()
            .copied()
            .find(|c| self.component.contains(c))
            .unwrap_or(Component::EE)
    }
}

/// Names of the catalog entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum CatalogName {
    SetupResourceAvailability,
    SetupFileMustExist,
    SetupInfrastructureHealth,
    TaskExecutableMustExist,
    TaskResourceAvailability,
    TaskConfigurationParameters,
    TaskLicenceValid,
    TaskMetamorphicRelation,
    TaskEndsWithinLimits,
    TaskEndsCorrectly,
    FileFileProperties,
    FileFileMustExist,
    FileFolderExists,
}

impl CatalogName {
    pub fn as_str(self) -> &'static str {
        self.entry().name
    }

    pub fn entry(self) -> &'static CatalogEntry {
        CATALOG
            .iter()
            .find(|e| e.id == self)
            .expect("every name has a catalog row")
    }
}

impl fmt::Display for CatalogName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown catalog entry `{0}`")]
pub struct UnknownEntry(pub String);

impl FromStr for CatalogName {
    type Err = UnknownEntry;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CATALOG
            .iter()
            .find(|e| e.name == s)
            .map(|e| e.id)
            .ok_or_else(|| UnknownEntry(s.to_string()))
    }
}

impl From<CatalogName> for String {
    fn from(c: CatalogName) -> String {
        c.as_str().to_string()
    }
}

impl TryFrom<String> for CatalogName {
    type Error = UnknownEntry;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// One row of the catalog.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatalogEntry {
    pub id: CatalogName,
    pub name: &'static str,
    pub severity: Severity,
    pub affected_object: AffectedObject,
    /// Property functions the entry constrains.
    pub targets: &'static str,
    pub time_of_check: &'static [CheckTime],
    pub component: &'static [Component],
    pub vc_type: VcType,
    pub recoverable: Recoverable,
    pub remediation: &'static str,
}

impl CatalogEntry {
    pub fn metadata(&self) -> VcMetadata {
        VcMetadata {
            severity: self.severity,
            affected_object: self.affected_object,
            vc_type: self.vc_type,
            time_of_check: self.time_of_check.to_vec(),
            component: self.component.to_vec(),
            recoverable: self.recoverable,
        }
    }

    /// Properties an instance of this entry may constrain.
    pub fn accepts_property(&self, p: &PropertyName) -> bool {
        use CatalogName::*;
        use PropertyName::*;
        match self.id {
            SetupResourceAvailability | TaskResourceAvailability => {
                matches!(p, MemoryBytes | CpuCores | GpuCount | DiskFreeBytes)
            }
            SetupFileMustExist | FileFileMustExist => matches!(p, FileExists),
            SetupInfrastructureHealth => matches!(p, NodeAlive | HeartbeatAgeSeconds),
            TaskExecutableMustExist => matches!(p, ExecutablePresent | HasExecutable(_)),
            TaskConfigurationParameters => matches!(p, ConfigParam(_)),
            TaskLicenceValid => matches!(p, LicenseAvailable(_)),
            TaskMetamorphicRelation => matches!(p, RelationHolds(_)),
            TaskEndsWithinLimits => matches!(p, RuntimeSeconds),
            TaskEndsCorrectly => matches!(p, ExitCode | LoggedNoError),
            FileFileProperties => matches!(
                p,
                FileSizeBytes | Checksum | FormatOk | InputsUnchanged | ClauseHolds(..)
            ),
            FileFolderExists => matches!(p, FolderExists),
        }
    }
}

use AffectedObject as A;
use CheckTime::{After, Before, During};
use Component::{EE, M, RM, S};

/// The thirteen builtin entries, grouped setup / task / file.
pub static CATALOG: [CatalogEntry; 13] = [
    CatalogEntry {
        id: CatalogName::SetupResourceAvailability,
        name: "setup/resource-availability",
        severity: Severity::Hard,
        affected_object: A::Setup,
        targets: "P_C(c) or P_T(s)",
        time_of_check: &[Before, During],
        component: &[S, M],
        vc_type: VcType::Dynamic,
        recoverable: Recoverable::Yes,
        remediation: "run on a cluster with larger nodes or lower the task's resource request",
    },
    CatalogEntry {
        id: CatalogName::SetupFileMustExist,
        name: "setup/file-must-exist",
        severity: Severity::Hard,
        affected_object: A::Setup,
        targets: "P_D^i(s), P_D^o(s)",
        time_of_check: &[Before, After],
        component: &[EE],
        vc_type: VcType::PosthocCapable,
        recoverable: Recoverable::Maybe,
        remediation: "stage the missing reference or input file on the nodes before starting",
    },
    CatalogEntry {
        id: CatalogName::SetupInfrastructureHealth,
        name: "setup/infrastructure-health",
        severity: Severity::Both,
        affected_object: A::Setup,
        targets: "P_C(c), P_C(s,t)",
        time_of_check: &[During],
        component: &[M],
        vc_type: VcType::Dynamic,
        recoverable: Recoverable::Yes,
        remediation: "check the node's health; its tasks are rescheduled on other nodes",
    },
    CatalogEntry {
        id: CatalogName::TaskExecutableMustExist,
        name: "task/executable-must-exist",
        severity: Severity::Hard,
        affected_object: A::Task,
        targets: "P_T(s)",
        time_of_check: &[Before],
        component: &[EE],
        vc_type: VcType::Dynamic,
        recoverable: Recoverable::No,
        remediation: "install the program on the node or fix the command",
    },
    CatalogEntry {
        id: CatalogName::TaskResourceAvailability,
        name: "task/resource-availability",
        severity: Severity::Hard,
        affected_object: A::Task,
        targets: "P_C(c) or P_T(s)",
        time_of_check: &[Before, During],
        component: &[S, M],
        vc_type: VcType::Dynamic,
        recoverable: Recoverable::Yes,
        remediation: "schedule the task on a node with enough resources or reduce its request",
    },
    CatalogEntry {
        id: CatalogName::TaskConfigurationParameters,
        name: "task/configuration-parameters",
        severity: Severity::Both,
        affected_object: A::Task,
        targets: "P_T(t)",
        time_of_check: &[Before],
        component: &[EE],
        vc_type: VcType::Dynamic,
        recoverable: Recoverable::No,
        remediation: "set the parameter to a value inside its declared range",
    },
    CatalogEntry {
        id: CatalogName::TaskLicenceValid,
        name: "task/licence-valid",
        severity: Severity::Hard,
        affected_object: A::Task,
        targets: "P_T(t)",
        time_of_check: &[Before],
        component: &[EE],
        vc_type: VcType::Dynamic,
        recoverable: Recoverable::Maybe,
        remediation: "renew the licence or wait until a licence slot is free",
    },
    CatalogEntry {
        id: CatalogName::TaskMetamorphicRelation,
        name: "task/metamorphic-relation",
        severity: Severity::Both,
        affected_object: A::Task,
        targets: "P_T(t)",
        time_of_check: &[After],
        component: &[EE],
        vc_type: VcType::PosthocCapable,
        recoverable: Recoverable::Maybe,
        remediation: "inspect the task's output; the input/output relation does not hold",
    },
    CatalogEntry {
        id: CatalogName::TaskEndsWithinLimits,
        name: "task/ends-within-limits",
        severity: Severity::Hard,
        affected_object: A::Task,
        targets: "P_T(s)",
        time_of_check: &[During],
        component: &[S, EE],
        vc_type: VcType::PosthocCapable,
        recoverable: Recoverable::Maybe,
        remediation: "investigate the straggler or raise the runtime limit",
    },
    CatalogEntry {
        id: CatalogName::TaskEndsCorrectly,
        name: "task/ends-correctly",
        severity: Severity::Both,
        affected_object: A::Task,
        targets: "P_T(s)",
        time_of_check: &[After],
        component: &[EE],
        vc_type: VcType::Dynamic,
        recoverable: Recoverable::Maybe,
        remediation: "read the task's stderr log; the command reported an error",
    },
    CatalogEntry {
        id: CatalogName::FileFileProperties,
        name: "file/file-properties",
        severity: Severity::Both,
        affected_object: A::File,
        targets: "P_D^i(s), P_D^o(s)",
        time_of_check: &[Before, After],
        component: &[EE, RM],
        vc_type: VcType::Dynamic,
        recoverable: Recoverable::Maybe,
        remediation: "inspect the file; its size, format or content is not as expected",
    },
    CatalogEntry {
        id: CatalogName::FileFileMustExist,
        name: "file/file-must-exist",
        severity: Severity::Hard,
        affected_object: A::File,
        targets: "P_D^i(s), P_D^o(s)",
        time_of_check: &[Before, After],
        component: &[EE],
        vc_type: VcType::PosthocCapable,
        recoverable: Recoverable::Maybe,
        remediation: "make sure the producing task writes the declared file",
    },
    CatalogEntry {
        id: CatalogName::FileFolderExists,
        name: "file/folder-exists",
        severity: Severity::Hard,
        affected_object: A::File,
        targets: "P_D^o(s)",
        time_of_check: &[Before],
        component: &[EE],
        vc_type: VcType::Dynamic,
        recoverable: Recoverable::Maybe,
        remediation: "create the folder or fix its permissions",
    },
];

/// The catalog row for `name`.
pub fn classify(name: &str) -> Result<VcMetadata, UnknownEntry> {
    Ok(name.parse::<CatalogName>()?.entry().metadata())
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

const HEADER: [&str; 8] = [
    "constraint",
    "sev",
    "object",
    "targets",
    "check",
    "component",
    "type",
    "recoverable",
];

fn table_line(cols: [&str; 8]) -> String {
    format!(
        "{:<31}{:<5}{:<8}{:<21}{:<15}{:<11}{:<6}{}\n",
        cols[0], cols[1], cols[2], cols[3], cols[4], cols[5], cols[6], cols[7]
    )
}

fn entry_line(e: &CatalogEntry) -> String {
    let check = join(e.time_of_check);
    let comp = join(e.component);
    table_line([
        e.name,
        e.severity.code(),
        &e.affected_object.to_string(),
        e.targets,
        &check,
        &comp,
        e.vc_type.code(),
        e.recoverable.symbol(),
    ])
}

/// The full catalog as a fixed-width table, grouped setup / task / file.
pub fn render_table() -> String {
    let mut out = table_line(HEADER);
    for e in &CATALOG {
        out.push_str(&entry_line(e));
    }
    out
}

/// One entry as `key: value` lines.
pub fn render_entry(e: &CatalogEntry) -> String {
    format!(
        "constraint:      {}\nseverity:        {}\naffected object: {}\ntargets:         {}\ntime of check:   {} ({})\ncomponent:       {}\ntype:            {}\nrecoverable:     {} ({})\nremediation:     {}\n",
        e.name,
        e.severity,
        e.affected_object,
        e.targets,
        join(e.time_of_check),
        e.metadata().discreteness(),
        join(e.component),
        e.vc_type,
        e.recoverable,
        e.recoverable.symbol(),
        e.remediation,
    )
}

/// Parameters for instantiating a catalog entry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CatalogParams {
    pub id: Option<String>,
    pub kind: Option<VcKind>,
    pub target: Option<Target>,
    pub property: Option<PropertyName>,
    pub op: Option<ComparisonOp>,
    pub value: Option<Value>,
    pub quantifier: Option<Quantifier>,
    pub severity: Option<Severity>,
    /// Task the constraint is attached to (dynamic constraints).
    pub task: Option<TaskId>,
    /// Overrides the entry's check times (e.g. a require clause on a promise-only entry).
    pub time_of_check: Option<Vec<CheckTime>>,
}

impl CatalogParams {
    pub fn for_task(task: impl Into<TaskId>) -> Self {
        CatalogParams {
            task: Some(task.into()),
            ..CatalogParams::default()
        }
    }
}

/// Builds a concrete constraint from a catalog entry.
///
/// Missing pieces default per entry: boolean existence entries compare `= true`,
/// dynamic task-attached constraints read the attached task (or its node).
pub fn instantiate_catalog(
    entry: CatalogName,
    params: CatalogParams,
) -> Result<ValidityConstraint, VcError> {
    let row = entry.entry();
    let kind = params.kind.unwrap_or(VcKind::Dynamic);

    let property = match (&params.property, entry) {
        (Some(p), _) => p.clone(),
        (None, CatalogName::SetupFileMustExist | CatalogName::FileFileMustExist) => PropertyName::FileExists,
        (None, CatalogName::FileFolderExists) => PropertyName::FolderExists,
        (None, CatalogName::TaskExecutableMustExist) => PropertyName::ExecutablePresent,
        (None, CatalogName::SetupInfrastructureHealth) => PropertyName::NodeAlive,
        (None, CatalogName::TaskEndsCorrectly) => PropertyName::ExitCode,
        (None, CatalogName::TaskEndsWithinLimits) => PropertyName::RuntimeSeconds,
        (None, _) => return Err(VcError::Schema(format!("{entry} needs a property"))),
    };
    if !row.accepts_property(&property) {
        return Err(VcError::Schema(format!(
            "{entry} does not constrain property `{property}`"
        )));
    }

    let target = match params.target.clone() {
        Some(t) => t,
        None => {
            let kinds = property.info().targets;
            match (kinds.first(), &params.task, kind) {
                (Some(TargetKind::Task), Some(t), _) => Target::Task(t.clone()),
                (Some(TargetKind::Node), Some(t), VcKind::Dynamic) => {
                    Target::Node(NodeSel::ScheduledNodeOf(t.clone()))
                }
                (Some(TargetKind::Node), _, _) => Target::Node(NodeSel::Cluster),
                _ => return Err(VcError::Schema(format!("{entry} needs a target"))),
            }
        }
    };

    let (op, value) = match (params.op, params.value.clone()) {
        (Some(op), Some(v)) => (op, v),
        (None, None) if property.is_boolean() => (ComparisonOp::Eq, Value::Bool(true)),
        (None, None) if property == PropertyName::ExitCode => (ComparisonOp::Eq, Value::Int(0)),
        _ => return Err(VcError::Schema(format!("{entry} needs a comparison and a constant"))),
    };

    let severity = match (row.severity, params.severity) {
        (Severity::Both, None) | (_, Some(Severity::Both)) => Severity::Hard,
        (s, None) => s,
        (Severity::Both, Some(s)) => s,
        (s, Some(o)) if s == o => s,
        (s, Some(o)) => {
            return Err(VcError::Schema(format!(
                "{entry} is always {s}; cannot instantiate it as {o}"
            )))
        }
    };

    let mut metadata = row.metadata();
    metadata.severity = severity;
    if kind == VcKind::Static {
        metadata.vc_type = VcType::Static;
        metadata.time_of_check = vec![Before];
    }
    if let Some(times) = params.time_of_check {
        if times.is_empty() {
            return Err(VcError::Schema("time of check must not be empty".into()));
        }
        metadata.time_of_check = times;
    }

    let quantifier = match (&target, kind, params.quantifier) {
        (_, _, Some(q)) => Some(q),
        (Target::Node(NodeSel::Cluster), VcKind::Static, None) => Some(Quantifier::AllNodes),
        _ => None,
    };

    let id = params.id.unwrap_or_else(|| {
        let mut id = format!("{entry}:{property}");
        if let Some(t) = &params.task {
            id = format!("{t}/{id}");
        }
        id
    });

    let vc = ValidityConstraint {
        id,
        kind,
        lhs: PropertyRef { target, name: property },
        op,
        rhs: value,
        quantifier,
        metadata,
        entry,
        task: params.task,
        clause: None,
    };
    vc.validate()?;
    Ok(vc)
}
