use serde::{Deserialize, Serialize};

use crate::engine::{RunOutcome, RunStatus};

/// Compute spent by a run and what static checking saved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavingsReport {
    /// Compute-seconds over all attempts.
    pub spend_s: f64,
    /// Spend that produced no correct result.
    pub waste_s: f64,
    /// Spend avoided by aborting before execution.
    pub savings_s: f64,
    /// How the run would have ended without static checks, when that was simulated.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub counterfactual: Option<RunStatus>,
}

/// Accounts a run. `counterfactual` is the same run without static checks;
/// it only counts when the checked run aborted before execution.
pub fn account(run: &RunOutcome, counterfactual: Option<&RunOutcome>) -> SavingsReport {
    let spend_s = run.records.spend();
    let waste_s = if run.status == RunStatus::Correct { 0.0 } else { spend_s };
    let counterfactual = counterfactual.filter(|_| run.status == RunStatus::AbortedStatic);
    SavingsReport {
        spend_s,
        waste_s,
        savings_s: counterfactual.map(|c| c.records.spend()).unwrap_or(0.0),
        counterfactual: counterfactual.map(|c| c.status.clone()),
    }
}
