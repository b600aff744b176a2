use super::config::RetryPolicy;
use crate::constraint::{Recoverable, RecoveryAction};

/// The next rung of the recovery ladder for a hard failure of a task.
///
/// `recoverable` is the least recoverable class among the failed
/// constraints; unattributed task failures count as `Maybe` and unevaluable
/// constraints as `No`. `retries_used` counts earlier retries of the task.
pub fn choose_recovery(
    recoverable: Recoverable,
    retries_used: u32,
    policy: &RetryPolicy,
    already_rescheduled: bool,
    alternative: bool,
) -> RecoveryAction {
    let can_retry = retries_used < policy.max_retries;
    let can_move = policy.reschedule && !already_rescheduled && alternative;
    match recoverable {
        Recoverable::No => RecoveryAction::AbortWorkflow,
        // The environment is at fault: a different node is the better bet.
        Recoverable::Yes if can_move => RecoveryAction::RescheduleOtherNode,
        Recoverable::Yes if can_retry => RecoveryAction::RetrySameNode,
        Recoverable::Maybe if can_retry => RecoveryAction::RetrySameNode,
        Recoverable::Maybe if can_move => RecoveryAction::RescheduleOtherNode,
        _ => RecoveryAction::AbortWorkflow,
    }
}
