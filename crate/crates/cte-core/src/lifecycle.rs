//! Document lifecycle state machine.
//!
//! Twelve legal (state, event) pairs; everything else is an illegal
//! transition. Terminal states are Rejected, Cancelled, and
//! NumberingCancelled — no event leaves them. A batch refused synchronously
//! at the authority's door rejects its members directly from Batched; a
//! refused cancellation returns the document to Approved (the attempt is
//! logged, not a distinct state).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LifecycleStatus {
    Draft,
    Batched,
    Transmitted,
    Processing,
    Approved,
    Rejected,
    Cancelling,
    Cancelled,
    CancellingNumbering,
    NumberingCancelled,
}

impl LifecycleStatus {
    pub const ALL: [LifecycleStatus; 10] = [
        LifecycleStatus::Draft,
        LifecycleStatus::Batched,
        LifecycleStatus::Transmitted,
        LifecycleStatus::Processing,
        LifecycleStatus::Approved,
        LifecycleStatus::Rejected,
        LifecycleStatus::Cancelling,
        LifecycleStatus::Cancelled,
        LifecycleStatus::CancellingNumbering,
        LifecycleStatus::NumberingCancelled,
    ];

    pub const fn is_terminal(self) -> bool {
        matches!(
            self,
            LifecycleStatus::Rejected
                | LifecycleStatus::Cancelled
                | LifecycleStatus::NumberingCancelled
        )
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            LifecycleStatus::Draft => "Draft",
            LifecycleStatus::Batched => "Batched",
            LifecycleStatus::Transmitted => "Transmitted",
            LifecycleStatus::Processing => "Processing",
            LifecycleStatus::Approved => "Approved",
            LifecycleStatus::Rejected => "Rejected",
            LifecycleStatus::Cancelling => "Cancelling",
            LifecycleStatus::Cancelled => "Cancelled",
            LifecycleStatus::CancellingNumbering => "CancellingNumbering",
            LifecycleStatus::NumberingCancelled => "NumberingCancelled",
        }
    }
}

impl std::fmt::Display for LifecycleStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything that can happen to a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LifecycleEvent {
    /// Packed into a batch.
    Packed,
    /// The batch's receipt arrived.
    ReceiptReceived,
    /// The whole batch was refused synchronously at receive.
    BatchRejected,
    /// Tracking reported the batch still in the input queue.
    TrackingSaysProcessing,
    /// Per-document result: approved.
    ResultApproved,
    /// Per-document result: rejected.
    ResultRejected,
    /// Withdrawal dispatched.
    WithdrawSent,
    /// Withdrawal result: cancelled.
    WithdrawApproved,
    /// Withdrawal result: refused; the document stays approved.
    WithdrawRejected,
    /// Numbering withdrawal dispatched.
    NumberingWithdrawSent,
    /// Numbering withdrawal result: voided.
    NumberingApproved,
    /// Numbering withdrawal result: refused; the number returns to draft.
    NumberingRejected,
}

impl LifecycleEvent {
    pub const ALL: [LifecycleEvent; 12] = [
        LifecycleEvent::Packed,
        LifecycleEvent::ReceiptReceived,
        LifecycleEvent::BatchRejected,
        LifecycleEvent::TrackingSaysProcessing,
        LifecycleEvent::ResultApproved,
        LifecycleEvent::ResultRejected,
        LifecycleEvent::WithdrawSent,
        LifecycleEvent::WithdrawApproved,
        LifecycleEvent::WithdrawRejected,
        LifecycleEvent::NumberingWithdrawSent,
        LifecycleEvent::NumberingApproved,
        LifecycleEvent::NumberingRejected,
    ];
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("illegal transition: {status:?} on {event:?}")]
pub struct IllegalTransition {
    pub status: LifecycleStatus,
    pub event: LifecycleEvent,
}

/// The complete legal transition table.
pub fn transition(
    current: LifecycleStatus,
    event: LifecycleEvent,
) -> Result<LifecycleStatus, IllegalTransition> {
    use LifecycleEvent as E;
    use LifecycleStatus as S;
    match (current, event) {
        (S::Draft, E::Packed) => Ok(S::Batched),
        (S::Batched, E::ReceiptReceived) => Ok(S::Transmitted),
        (S::Batched, E::BatchRejected) => Ok(S::Rejected),
        (S::Transmitted, E::TrackingSaysProcessing) => Ok(S::Processing),
        (S::Processing, E::ResultApproved) => Ok(S::Approved),
        (S::Processing, E::ResultRejected) => Ok(S::Rejected),
        (S::Approved, E::WithdrawSent) => Ok(S::Cancelling),
        (S::Cancelling, E::WithdrawApproved) => Ok(S::Cancelled),
        (S::Cancelling, E::WithdrawRejected) => Ok(S::Approved),
        (S::Draft, E::NumberingWithdrawSent) => Ok(S::CancellingNumbering),
        (S::CancellingNumbering, E::NumberingApproved) => Ok(S::NumberingCancelled),
        (S::CancellingNumbering, E::NumberingRejected) => Ok(S::Draft),
        (status, event) => Err(IllegalTransition { status, event }),
    }
}
