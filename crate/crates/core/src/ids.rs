//! Identifier newtypes shared across the crate.

use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}

id_type!(
    /// Name of a task in a workflow.
    TaskId
);
id_type!(
    /// Name of the data item carried by a dependency.
    LabelId
);
id_type!(
    /// Name of a compute node.
    NodeId
);

/// Identifier of the synthetic start task injected by the desugarer.
pub const START_TASK: &str = "__start__";
/// Identifier of the synthetic end task injected by the desugarer.
pub const END_TASK: &str = "__end__";
