//! The closed registry of properties a constraint may reference.
//!
//! Every property has a fixed value type, the kinds of object it can be read
//! from, a unit, and (for numeric properties) the smallest value it can take.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::value::ValueType;

/// Registry version; bump when properties are added or change meaning.
pub const REGISTRY_VERSION: u32 = 1;

/// Which contract block a clause sits in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    Require,
    Promise,
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Block::Require => "require",
            Block::Promise => "promise",
        })
    }
}

/// A property identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum PropertyName {
    MemoryBytes,
    CpuCores,
    GpuCount,
    DiskFreeBytes,
    NodeAlive,
    HeartbeatAgeSeconds,
    HasExecutable(String),
    FileExists,
    FileSizeBytes,
    Checksum,
    FormatOk,
    FolderExists,
    ExitCode,
    RuntimeSeconds,
    ExecutablePresent,
    LicenseAvailable(String),
    ConfigParam(String),
    RelationHolds(String),
    LoggedNoError,
    InputsUnchanged,
    /// Outcome of the `index`-th clause of a task's contract block.
    ClauseHolds(Block, usize),
}

/// Kind of object a property is read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Task,
    Label,
    Node,
}

/// Registry row for one property.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropertyInfo {
    pub value_type: ValueType,
    pub targets: &'static [TargetKind],
    pub unit: &'static str,
    /// Smallest observable value, for numeric properties.
    pub lower_bound: Option<f64>,
    /// Whether the value can change while a workflow runs.
    pub step_dependent: bool,
}

const TASK: &[TargetKind] = &[TargetKind::Task];
const LABEL: &[TargetKind] = &[TargetKind::Label];
const NODE: &[TargetKind] = &[TargetKind::Node];

impl PropertyName {
    pub fn info(&self) -> PropertyInfo {
        use PropertyName::*;
        let (value_type, targets, unit, lower_bound, step_dependent) = match self {
            MemoryBytes => (ValueType::Int, NODE, "bytes", Some(0.0), false),
            CpuCores => (ValueType::Int, NODE, "cores", Some(0.0), false),
            GpuCount => (ValueType::Int, NODE, "gpus", Some(0.0), false),
            DiskFreeBytes => (ValueType::Int, NODE, "bytes", Some(0.0), true),
            NodeAlive => (ValueType::Bool, NODE, "", None, true),
            HeartbeatAgeSeconds => (ValueType::Decimal, NODE, "seconds", Some(0.0), true),
            HasExecutable(_) => (ValueType::Bool, NODE, "", None, false),
            FileExists => (ValueType::Bool, LABEL, "", None, true),
            FileSizeBytes => (ValueType::Int, LABEL, "bytes", Some(0.0), true),
            Checksum => (ValueType::Str, LABEL, "sha256 hex", None, true),
            FormatOk => (ValueType::Bool, LABEL, "", None, true),
            FolderExists => (ValueType::Bool, LABEL, "", None, true),
            ExitCode => (ValueType::Int, TASK, "", Some(0.0), true),
            RuntimeSeconds => (ValueType::Decimal, TASK, "seconds", Some(0.0), true),
            ExecutablePresent => (ValueType::Bool, TASK, "", None, true),
            LicenseAvailable(_) => (ValueType::Bool, TASK, "", None, true),
            ConfigParam(_) => (ValueType::Decimal, TASK, "", None, false),
            RelationHolds(_) => (ValueType::Bool, TASK, "", None, true),
            LoggedNoError => (ValueType::Bool, TASK, "", None, true),
            InputsUnchanged => (ValueType::Bool, TASK, "", None, true),
            ClauseHolds(..) => (ValueType::Bool, TASK, "", None, true),
        };
        PropertyInfo {
            value_type,
            targets,
            unit,
            lower_bound,
            step_dependent,
        }
    }

    /// Configuration parameters accept any scalar; every other property has one type.
    pub fn accepts(&self, ty: ValueType) -> bool {
        match self {
            PropertyName::ConfigParam(_) => true,
            _ => self.info().value_type.accepts(ty),
        }
    }

    pub fn is_boolean(&self) -> bool {
        !matches!(self, PropertyName::ConfigParam(_)) && self.info().value_type == ValueType::Bool
    }

    pub fn allows(&self, kind: TargetKind) -> bool {
        self.info().targets.contains(&kind)
    }

    /// Every parameterless property, for listings and generators.
    pub fn simple() -> Vec<PropertyName> {
        use PropertyName::*;
        vec![
            MemoryBytes,
            CpuCores,
            GpuCount,
            DiskFreeBytes,
            NodeAlive,
            HeartbeatAgeSeconds,
            FileExists,
            FileSizeBytes,
            Checksum,
            FormatOk,
            FolderExists,
            ExitCode,
            RuntimeSeconds,
            ExecutablePresent,
            LoggedNoError,
            InputsUnchanged,
        ]
    }
}

impl fmt::Display for PropertyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use PropertyName::*;
        match self {
            MemoryBytes => f.write_str("memory_bytes"),
            CpuCores => f.write_str("cpu_cores"),
            GpuCount => f.write_str("gpu_count"),
            DiskFreeBytes => f.write_str("disk_free_bytes"),
            NodeAlive => f.write_str("node_alive"),
            HeartbeatAgeSeconds => f.write_str("heartbeat_age_seconds"),
            HasExecutable(n) => write!(f, "has_executable({n})"),
            FileExists => f.write_str("file_exists"),
            FileSizeBytes => f.write_str("file_size_bytes"),
            Checksum => f.write_str("checksum"),
            FormatOk => f.write_str("format_ok"),
            FolderExists => f.write_str("folder_exists"),
            ExitCode => f.write_str("exit_code"),
            RuntimeSeconds => f.write_str("runtime_seconds"),
            ExecutablePresent => f.write_str("executable_present"),
            LicenseAvailable(n) => write!(f, "license_available({n})"),
            ConfigParam(k) => write!(f, "config_param({k})"),
            RelationHolds(n) => write!(f, "relation_holds({n})"),
            LoggedNoError => f.write_str("logged_no_error"),
            InputsUnchanged => f.write_str("inputs_unchanged"),
            ClauseHolds(b, i) => write!(f, "clause_holds({b}#{i})"),
        }
    }
}

/// An identifier that is not in the registry.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown property `{0}`")]
pub struct UnknownProperty(pub String);

impl FromStr for PropertyName {
    type Err = UnknownProperty;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use PropertyName::*;
        let unknown = || UnknownProperty(s.to_string());
        if let Some(open) = s.find('(') {
            let inner = s[open + 1..].strip_suffix(')').ok_or_else(unknown)?.trim();
            if inner.is_empty() {
                return Err(unknown());
            }
            let arg = inner.to_string();
            return match &s[..open] {
                "has_executable" => Ok(HasExecutable(arg)),
                "license_available" => Ok(LicenseAvailable(arg)),
                "config_param" => Ok(ConfigParam(arg)),
                "relation_holds" => Ok(RelationHolds(arg)),
                "clause_holds" => {
                    let (b, i) = inner.split_once('#').ok_or_else(unknown)?;
                    let block = match b {
                        "require" => Block::Require,
                        "promise" => Block::Promise,
                        _ => return Err(unknown()),
                    };
                    Ok(ClauseHolds(block, i.parse().map_err(|_| unknown())?))
                }
                _ => Err(unknown()),
            };
        }
        Ok(match s {
            "memory_bytes" => MemoryBytes,
            "cpu_cores" => CpuCores,
            "gpu_count" => GpuCount,
            "disk_free_bytes" => DiskFreeBytes,
            "node_alive" => NodeAlive,
            "heartbeat_age_seconds" => HeartbeatAgeSeconds,
            "file_exists" => FileExists,
            "file_size_bytes" => FileSizeBytes,
            "checksum" => Checksum,
            "format_ok" => FormatOk,
            "folder_exists" => FolderExists,
            "exit_code" => ExitCode,
            "runtime_seconds" => RuntimeSeconds,
            "executable_present" => ExecutablePresent,
            "logged_no_error" => LoggedNoError,
            "inputs_unchanged" => InputsUnchanged,
            _ => return Err(unknown()),
        })
    }
}

impl From<PropertyName> for String {
    fn from(p: PropertyName) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for PropertyName {
    type Error = UnknownProperty;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}
