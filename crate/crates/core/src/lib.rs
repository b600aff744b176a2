//! Validity-constraint checking for data analysis workflows.

pub mod cli;
pub mod constraint;
pub mod daw;
pub mod engine;
pub mod ids;
pub mod lang;
pub mod sim;
pub mod value;
