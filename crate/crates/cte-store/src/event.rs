//! Journal events.
//!
//! The journal is the system of record: every effect the gateway performs is
//! either recorded here or recomputable from what is. Events that settle the
//! fate of several documents at once (a batch outcome, a sync rejection)
//! carry the whole outcome in one record, so a crash can never strand half
//! of a batch between records.

use serde::{Deserialize, Serialize};

use cte_core::{CTeDocument, LifecycleEvent, LifecycleStatus, Timestamp};

/// Where an ingested line came from. Input files are append-only, so
/// (file, line) identifies a line forever and doubles as the replay
/// dedup marker.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IngestSource {
    pub file: String,
    pub line: u64,
}

/// An operation the gateway is about to perform against the authority.
/// Journaled before the request leaves, so recovery knows what may have
/// reached the other side. The withdraw intents also mark the local
/// transition (Approved -> Cancelling, Draft -> CancellingNumbering for the
/// listed keys) so one record settles a cancel line completely; `source`
/// carries the input line that asked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DispatchIntent {
    SendBatch {
        batch_id: u64,
    },
    Withdraw {
        access_key: String,
        reason: String,
        source: Option<IngestSource>,
    },
    WithdrawNumbering {
        establishment: String,
        series: String,
        from: u32,
        to: u32,
        reason: String,
        access_keys: Vec<String>,
        source: Option<IngestSource>,
    },
}

/// A settled interaction with the authority, applied atomically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AppliedResult {
    /// The whole batch was rejected synchronously at send time.
    /// Every member: Batched -> Rejected.
    BatchSync {
        batch_id: u64,
        code: u16,
        message: String,
    },
    /// Asynchronous processing finished. Members in Transmitted take the
    /// implicit hop through Processing; per-document code 100 approves,
    /// anything else rejects.
    BatchOutcome {
        batch_id: u64,
        receipt: String,
        completed_at: Timestamp,
        per_doc: Vec<(String, u16)>,
    },
    /// Cancellation settled: 101 cancels, anything else returns the
    /// document to Approved.
    WithdrawOutcome {
        access_key: String,
        code: u16,
        message: String,
    },
    /// Numbering cancellation settled for the listed documents: 102 voids
    /// them, anything else returns them to Draft.
    NumberingOutcome {
        establishment: String,
        series: String,
        from: u32,
        to: u32,
        code: u16,
        access_keys: Vec<String>,
    },
    /// A status-tracking answer. No lifecycle effect; recorded for audit.
    TrackConfirm {
        access_key: String,
        code: u16,
        matches: bool,
    },
    /// A request refused before reaching the authority (illegal local
    /// state). No lifecycle effect; produces the coded OUT record and, via
    /// `source`, settles the input line that asked.
    LocalRefusal {
        access_key: String,
        code: u16,
        operation: String,
        /// Current local status; None when the key is unknown here.
        status: Option<cte_core::LifecycleStatus>,
        source: Option<IngestSource>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventBody {
    /// A document entered the system (already signed, status Draft).
    DocUpserted {
        document: CTeDocument,
        source: Option<IngestSource>,
    },
    /// A single-document transition observed or initiated outside a
    /// composite result: poll saw Processing, or a withdraw was marked.
    StatusChanged {
        access_key: String,
        from: LifecycleStatus,
        to: LifecycleStatus,
        cause: LifecycleEvent,
        note: Option<String>,
    },
    /// Documents were packed: every member Draft -> Batched.
    BatchCreated {
        batch_id: u64,
        establishment: String,
        access_keys: Vec<String>,
        serialized_size: u64,
    },
    DispatchIntent {
        intent: DispatchIntent,
    },
    /// The authority accepted a batch: every member Batched -> Transmitted.
    ReceiptRecorded {
        batch_id: u64,
        receipt: String,
        received_at: Timestamp,
        place: String,
    },
    ResultApplied {
        result: AppliedResult,
    },
    /// A correction letter was registered against an approved document.
    CorrectionNoted {
        access_key: String,
        text: String,
        code: u16,
    },
    /// Something ingested or received that could not be processed; kept for
    /// the error report. Carries the source marker when a file line caused it.
    Anomaly {
        context: String,
        message: String,
        source: Option<IngestSource>,
    },
}

impl EventBody {
    /// Stable kind name, used in reports and corruption messages.
    pub fn kind(&self) -> &'static str {
        match self {
            EventBody::DocUpserted { .. } => "DocUpserted",
            EventBody::StatusChanged { .. } => "StatusChanged",
            EventBody::BatchCreated { .. } => "BatchCreated",
            EventBody::DispatchIntent { .. } => "DispatchIntent",
            EventBody::ReceiptRecorded { .. } => "ReceiptRecorded",
            EventBody::ResultApplied { .. } => "ResultApplied",
            EventBody::CorrectionNoted { .. } => "CorrectionNoted",
            EventBody::Anomaly { .. } => "Anomaly",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalEvent {
    /// Dense, strictly increasing, starting at 1.
    pub seq: u64,
    pub at: Timestamp,
    pub body: EventBody,
}
