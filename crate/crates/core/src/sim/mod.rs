//! Deterministic discrete-event cluster simulator.
//!
//! Tasks run from their simulation profiles on a virtual clock; the same
//! coordinator that drives real runs checks constraints and recovers.

mod account;
mod backend;
mod clock;
mod faults;
mod profile;

pub use account::{account, SavingsReport};
pub use clock::SimClock;
pub use faults::{inject, FaultError, FaultEvent, FaultScript, FAULT_RANK};
pub use profile::{SimOutput, SimProfile, DEFAULT_OUTPUT_BYTES};
pub(crate) use backend::SimBackend;

use crate::daw::ClusterSpec;
use crate::engine::{write_log, Coordinator, EngineConfig, EngineError, Mode, RunOutcome, RunStatus};
use crate::lang::Desugared;

fn simulate_once(wf: &Desugared, cluster: &ClusterSpec, config: &EngineConfig, faults: &FaultScript) -> RunOutcome {
    let backend = backend::SimBackend::new(wf, cluster, config, faults);
    Coordinator::new(wf, cluster, config, backend).run(None, faults)
}

/// Simulates a workflow run and accounts its compute.
///
/// When static checks abort the run, the same run is simulated again
/// without them to measure what the abort saved.
pub fn simulate(wf: &Desugared, cluster: &ClusterSpec, config: &EngineConfig, faults: &FaultScript) -> Result<RunOutcome, EngineError> {
    let config = EngineConfig {
        mode: Mode::Simulated,
        ..config.clone()
    };
    config.validate()?;
    faults.validate()?;
    for t in wf.daw.task_defs.values() {
        if t.command.is_some() && t.sim_profile.is_none() {
            return Err(EngineError::MissingProfile(t.id.clone()));
        }
        if let Some(p) = &t.sim_profile {
            p.validate().map_err(|e| EngineError::BadProfile(t.id.clone(), e))?;
        }
    }
    let mut outcome = simulate_once(wf, cluster, &config, faults);
    let counterfactual = (outcome.status == RunStatus::AbortedStatic).then(|| {
        let unchecked = EngineConfig {
            static_checks: false,
            keep_sandbox: false,
            ..config.clone()
        };
        simulate_once(&wf.without_static(), cluster, &unchecked, faults)
    });
    outcome.savings = Some(account(&outcome, counterfactual.as_ref()));
    write_log(&config, &outcome)?;
    Ok(outcome)
}
