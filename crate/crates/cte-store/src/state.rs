//! Materialized state: the deterministic fold over journal events.
//!
//! `apply` validates an event against the current state (every implied
//! lifecycle hop must be legal) and only then mutates, so an accepted
//! journal can always be replayed. Free-text details that may differ
//! between a direct run and a crash-recovered one (transport messages,
//! recovery markers) are deliberately kept out of this state; recovery
//! must converge to the same materialization.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use cte_core::{transition, IllegalTransition, LifecycleEvent, LifecycleStatus, Timestamp};

use crate::event::{AppliedResult, DispatchIntent, EventBody, IngestSource, JournalEvent};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub seq: u64,
    pub at: Timestamp,
    pub cause: LifecycleEvent,
    pub from: LifecycleStatus,
    pub to: LifecycleStatus,
    pub code: Option<u16>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocRecord {
    pub document: cte_core::CTeDocument,
    pub ingested_at: Timestamp,
    pub source: Option<IngestSource>,
    pub history: Vec<HistoryEntry>,
    pub batch_id: Option<u64>,
    pub last_code: Option<u16>,
    pub completed_at: Option<Timestamp>,
    pub track_confirmed: bool,
}

impl DocRecord {
    pub fn status(&self) -> LifecycleStatus {
        self.document.status
    }

    pub fn ever_approved(&self) -> bool {
        self.history
            .iter()
            .any(|h| h.to == LifecycleStatus::Approved)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub batch_id: u64,
    pub establishment: String,
    pub access_keys: Vec<String>,
    pub serialized_size: u64,
    pub created_at: Timestamp,
    pub receipt: Option<String>,
    pub received_at: Option<Timestamp>,
    pub place: Option<String>,
    pub sync_code: Option<u16>,
    pub completed_at: Option<Timestamp>,
}

impl BatchRecord {
    /// A final answer exists (sync rejection or asynchronous outcome).
    pub fn settled(&self) -> bool {
        self.sync_code.is_some() || self.completed_at.is_some()
    }

    /// Accepted but result still pending: the poll set.
    pub fn awaiting_result(&self) -> bool {
        self.receipt.is_some() && !self.settled()
    }

    /// Never accepted: the (re)send set.
    pub fn awaiting_send(&self) -> bool {
        self.receipt.is_none() && self.sync_code.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentRecord {
    pub seq: u64,
    pub at: Timestamp,
    pub intent: DispatchIntent,
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnomalyRecord {
    pub seq: u64,
    pub at: Timestamp,
    pub context: String,
    pub message: String,
    pub source: Option<IngestSource>,
}

/// One line of the OUT projection, dated by the event that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutLine {
    pub seq: u64,
    /// UTC day, `YYYY-MM-DD`; drives the output file name.
    pub date: String,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct State {
    docs: BTreeMap<String, DocRecord>,
    batches: BTreeMap<u64, BatchRecord>,
    intents: Vec<IntentRecord>,
    anomalies: Vec<AnomalyRecord>,
    out_lines: Vec<OutLine>,
    ingested: BTreeSet<(String, u64)>,
    doc_count: u64,
    last_seq: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum StateError {
    #[error("event seq {got} does not follow {last}")]
    NonDense { last: u64, got: u64 },
    #[error("unknown document {0}")]
    UnknownDocument(String),
    #[error("document {0} already stored")]
    DuplicateDocument(String),
    #[error("unknown batch {0}")]
    UnknownBatch(u64),
    #[error("batch {0} already created")]
    DuplicateBatch(u64),
    #[error("document {access_key}: {source}")]
    Transition {
        access_key: String,
        #[source]
        source: IllegalTransition,
    },
    #[error("batch {batch_id}: {detail}")]
    BatchState { batch_id: u64, detail: String },
    #[error("document {access_key}: {detail}")]
    DocumentState { access_key: String, detail: String },
    #[error("source {file}:{line} already ingested")]
    DuplicateSource { file: String, line: u64 },
    #[error("document {0} carries no signature")]
    Unsigned(String),
}

impl State {
    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    /// Count of documents ever stored; seeds the access-key random field.
    pub fn doc_count(&self) -> u64 {
        self.doc_count
    }

    pub fn doc(&self, access_key: &str) -> Option<&DocRecord> {
        self.docs.get(access_key)
    }

    pub fn docs(&self) -> impl Iterator<Item = &DocRecord> {
        self.docs.values()
    }

    pub fn batch(&self, batch_id: u64) -> Option<&BatchRecord> {
        self.batches.get(&batch_id)
    }

    pub fn batches(&self) -> impl Iterator<Item = &BatchRecord> {
        self.batches.values()
    }

    pub fn next_batch_id(&self) -> u64 {
        self.batches.keys().next_back().map_or(1, |id| id + 1)
    }

    pub fn anomalies(&self) -> &[AnomalyRecord] {
        &self.anomalies
    }

    pub fn out_lines(&self) -> &[OutLine] {
        &self.out_lines
    }

    pub fn intents(&self) -> &[IntentRecord] {
        &self.intents
    }

    pub fn unresolved_intents(&self) -> impl Iterator<Item = &IntentRecord> {
        self.intents.iter().filter(|i| !i.resolved)
    }

    pub fn is_ingested(&self, file: &str, line: u64) -> bool {
        self.ingested.contains(&(file.to_string(), line))
    }

    /// Documents approved but not yet confirmed via status tracking.
    pub fn approved_unconfirmed(&self) -> Vec<String> {
        self.docs
            .values()
            .filter(|d| d.status() == LifecycleStatus::Approved && !d.track_confirmed)
            .map(|d| d.document.access_key.as_str().to_string())
            .collect()
    }

    /// Validates and applies one event; returns the OUT lines it produced.
    pub fn apply(&mut self, event: &JournalEvent) -> Result<Vec<OutLine>, StateError> {
        if event.seq != self.last_seq + 1 {
            return Err(StateError::NonDense {
                last: self.last_seq,
                got: event.seq,
            });
        }
        let mark = self.out_lines.len();
        self.apply_body(event)?;
        self.last_seq = event.seq;
        Ok(self.out_lines[mark..].to_vec())
    }

    fn apply_body(&mut self, event: &JournalEvent) -> Result<(), StateError> {
        let seq = event.seq;
        let at = event.at;
        match &event.body {
            EventBody::DocUpserted { document, source } => {
                let key = document.access_key.as_str().to_string();
                if self.docs.contains_key(&key) {
                    return Err(StateError::DuplicateDocument(key));
                }
                if document.status != LifecycleStatus::Draft {
                    return Err(StateError::DocumentState {
                        access_key: key,
                        detail: format!("stored in status {}, not Draft", document.status),
                    });
                }
                if document.signature.is_none() {
                    return Err(StateError::Unsigned(key));
                }
                self.claim_source(source)?;
                self.docs.insert(
                    key,
                    DocRecord {
                        document: document.clone(),
                        ingested_at: at,
                        source: source.clone(),
                        history: Vec::new(),
                        batch_id: None,
                        last_code: None,
                        completed_at: None,
                        track_confirmed: false,
                    },
                );
                self.doc_count += 1;
            }

            EventBody::StatusChanged {
                access_key,
                from,
                to,
                cause,
                note,
            } => {
                let current = self.require_doc(access_key)?.status();
                if current != *from {
                    return Err(StateError::DocumentState {
                        access_key: access_key.clone(),
                        detail: format!("status is {current}, event says {from}"),
                    });
                }
                let planned = self.plan(access_key, *cause)?;
                if planned.1 != *to {
                    return Err(StateError::DocumentState {
                        access_key: access_key.clone(),
                        detail: format!("{cause:?} leads to {}, event says {to}", planned.1),
                    });
                }
                self.commit(access_key, seq, at, *cause, None, note.clone());
            }

            EventBody::BatchCreated {
                batch_id,
                establishment,
                access_keys,
                serialized_size,
            } => {
                if self.batches.contains_key(batch_id) {
                    return Err(StateError::DuplicateBatch(*batch_id));
                }
                if access_keys.is_empty() {
                    return Err(StateError::BatchState {
                        batch_id: *batch_id,
                        detail: "no members".into(),
                    });
                }
                for key in access_keys {
                    let doc = self.require_doc(key)?;
                    if doc.batch_id.is_some() {
                        return Err(StateError::DocumentState {
                            access_key: key.clone(),
                            detail: format!("already in batch {}", doc.batch_id.unwrap()),
                        });
                    }
                    if doc.document.establishment.as_str() != establishment {
                        return Err(StateError::DocumentState {
                            access_key: key.clone(),
                            detail: format!(
                                "establishment {} differs from batch {establishment}",
                                doc.document.establishment.as_str()
                            ),
                        });
                    }
                    self.plan(key, LifecycleEvent::Packed)?;
                }
                for key in access_keys {
                    self.commit(key, seq, at, LifecycleEvent::Packed, None, None);
                    self.docs.get_mut(key).unwrap().batch_id = Some(*batch_id);
                }
                self.batches.insert(
                    *batch_id,
                    BatchRecord {
                        batch_id: *batch_id,
                        establishment: establishment.clone(),
                        access_keys: access_keys.clone(),
                        serialized_size: *serialized_size,
                        created_at: at,
                        receipt: None,
                        received_at: None,
                        place: None,
                        sync_code: None,
                        completed_at: None,
                    },
                );
            }

            EventBody::DispatchIntent { intent } => {
                match intent {
                    DispatchIntent::SendBatch { batch_id } => {
                        let batch = self.require_batch(*batch_id)?;
                        if !batch.awaiting_send() {
                            return Err(StateError::BatchState {
                                batch_id: *batch_id,
                                detail: "not awaiting send".into(),
                            });
                        }
                    }
                    DispatchIntent::Withdraw {
                        access_key,
                        reason,
                        source,
                    } => {
                        self.plan(access_key, LifecycleEvent::WithdrawSent)?;
                        self.claim_source(source)?;
                        self.commit(
                            access_key,
                            seq,
                            at,
                            LifecycleEvent::WithdrawSent,
                            None,
                            Some(reason.clone()),
                        );
                    }
                    DispatchIntent::WithdrawNumbering {
                        establishment,
                        series,
                        from,
                        to,
                        reason,
                        access_keys,
                        source,
                    } => {
                        if from > to {
                            return Err(StateError::BatchState {
                                batch_id: 0,
                                detail: format!("empty numbering range {from}-{to}"),
                            });
                        }
                        for key in access_keys {
                            let doc = self.require_doc(key)?;
                            let number: u32 =
                                doc.document.number.parse().unwrap_or(u32::MAX);
                            if doc.document.establishment.as_str() != establishment
                                || doc.document.series != *series
                                || number < *from
                                || number > *to
                            {
                                return Err(StateError::DocumentState {
                                    access_key: key.clone(),
                                    detail: "outside the numbering range".into(),
                                });
                            }
                            self.plan(key, LifecycleEvent::NumberingWithdrawSent)?;
                        }
                        self.claim_source(source)?;
                        for key in access_keys {
                            self.commit(
                                key,
                                seq,
                                at,
                                LifecycleEvent::NumberingWithdrawSent,
                                None,
                                Some(reason.clone()),
                            );
                        }
                    }
                }
                self.intents.push(IntentRecord {
                    seq,
                    at,
                    intent: intent.clone(),
                    resolved: false,
                });
            }

            EventBody::ReceiptRecorded {
                batch_id,
                receipt,
                received_at,
                place,
            } => {
                let batch = self.require_batch(*batch_id)?;
                if !batch.awaiting_send() {
                    return Err(StateError::BatchState {
                        batch_id: *batch_id,
                        detail: "already has a receipt or sync rejection".into(),
                    });
                }
                let members = batch.access_keys.clone();
                for key in &members {
                    self.plan(key, LifecycleEvent::ReceiptReceived)?;
                }
                for key in &members {
                    self.commit(key, seq, at, LifecycleEvent::ReceiptReceived, None, None);
                }
                let batch = self.batches.get_mut(batch_id).unwrap();
                batch.receipt = Some(receipt.clone());
                batch.received_at = Some(*received_at);
                batch.place = Some(place.clone());
                self.resolve_intents(|i| {
                    matches!(i, DispatchIntent::SendBatch { batch_id: b } if b == batch_id)
                });
            }

            EventBody::ResultApplied { result } => self.apply_result(seq, at, result)?,

            EventBody::CorrectionNoted {
                access_key,
                text,
                code: _,
            } => {
                let doc = self.require_doc(access_key)?;
                if doc.status() != LifecycleStatus::Approved {
                    return Err(StateError::DocumentState {
                        access_key: access_key.clone(),
                        detail: format!("correction on status {}", doc.status()),
                    });
                }
                self.docs
                    .get_mut(access_key)
                    .unwrap()
                    .document
                    .correction_notes
                    .push(text.clone());
            }

            EventBody::Anomaly {
                context,
                message,
                source,
            } => {
                self.claim_source(source)?;
                if let Some(src) = source {
                    self.out_lines.push(OutLine {
                        seq,
                        date: at.date(),
                        text: format!("ERR|{}|{}|{}", src.line, context, message),
                    });
                }
                self.anomalies.push(AnomalyRecord {
                    seq,
                    at,
                    context: context.clone(),
                    message: message.clone(),
                    source: source.clone(),
                });
            }
        }
        Ok(())
    }

    fn apply_result(
        &mut self,
        seq: u64,
        at: Timestamp,
        result: &AppliedResult,
    ) -> Result<(), StateError> {
        match result {
            AppliedResult::BatchSync {
                batch_id,
                code,
                message: _,
            } => {
                let batch = self.require_batch(*batch_id)?;
                if batch.settled() || batch.receipt.is_some() {
                    return Err(StateError::BatchState {
                        batch_id: *batch_id,
                        detail: "already settled or accepted".into(),
                    });
                }
                let members = batch.access_keys.clone();
                for key in &members {
                    self.plan(key, LifecycleEvent::BatchRejected)?;
                }
                for key in &members {
                    self.commit(key, seq, at, LifecycleEvent::BatchRejected, Some(*code), None);
                    self.out_lines.push(OutLine {
                        seq,
                        date: at.date(),
                        text: format!("RESULT|{key}|{code}|Rejected||{}", at.to_rfc3339()),
                    });
                }
                self.batches.get_mut(batch_id).unwrap().sync_code = Some(*code);
                self.resolve_intents(|i| {
                    matches!(i, DispatchIntent::SendBatch { batch_id: b } if b == batch_id)
                });
            }

            AppliedResult::BatchOutcome {
                batch_id,
                receipt,
                completed_at,
                per_doc,
            } => {
                let batch = self.require_batch(*batch_id)?;
                if batch.settled() {
                    return Err(StateError::BatchState {
                        batch_id: *batch_id,
                        detail: "already settled".into(),
                    });
                }
                if batch.receipt.as_deref() != Some(receipt.as_str()) {
                    return Err(StateError::BatchState {
                        batch_id: *batch_id,
                        detail: format!(
                            "receipt {receipt} does not match {:?}",
                            batch.receipt
                        ),
                    });
                }
                let mut expected: Vec<&str> =
                    batch.access_keys.iter().map(|k| k.as_str()).collect();
                let mut got: Vec<&str> = per_doc.iter().map(|(k, _)| k.as_str()).collect();
                expected.sort_unstable();
                got.sort_unstable();
                if expected != got {
                    return Err(StateError::BatchState {
                        batch_id: *batch_id,
                        detail: "per-document codes do not cover the batch".into(),
                    });
                }
                // Plan both the implicit Processing hop and the final result.
                for (key, code) in per_doc {
                    let status = self.require_doc(key)?.status();
                    let cause = result_cause(*code);
                    match status {
                        LifecycleStatus::Transmitted => {
                            let mid =
                                self.plan(key, LifecycleEvent::TrackingSaysProcessing)?.1;
                            transition(mid, cause).map_err(|source| StateError::Transition {
                                access_key: key.clone(),
                                source,
                            })?;
                        }
                        _ => {
                            self.plan(key, cause)?;
                        }
                    }
                }
                for (key, code) in per_doc {
                    if self.docs[key].status() == LifecycleStatus::Transmitted {
                        self.commit(
                            key,
                            seq,
                            at,
                            LifecycleEvent::TrackingSaysProcessing,
                            None,
                            None,
                        );
                    }
                    let cause = result_cause(*code);
                    self.commit(key, seq, at, cause, Some(*code), None);
                    let doc = self.docs.get_mut(key).unwrap();
                    doc.completed_at = Some(*completed_at);
                    let status = doc.document.status;
                    self.out_lines.push(OutLine {
                        seq,
                        date: at.date(),
                        text: format!(
                            "RESULT|{key}|{code}|{status}|{receipt}|{}",
                            completed_at.to_rfc3339()
                        ),
                    });
                }
                self.batches.get_mut(batch_id).unwrap().completed_at = Some(*completed_at);
            }

            AppliedResult::WithdrawOutcome {
                access_key,
                code,
                message: _,
            } => {
                let cause = if *code == 101 {
                    LifecycleEvent::WithdrawApproved
                } else {
                    LifecycleEvent::WithdrawRejected
                };
                self.plan(access_key, cause)?;
                self.commit(access_key, seq, at, cause, Some(*code), None);
                let status = self.docs[access_key].document.status;
                self.out_lines.push(OutLine {
                    seq,
                    date: at.date(),
                    text: format!("RESULT|{access_key}|{code}|{status}||{}", at.to_rfc3339()),
                });
                if *code != 101 {
                    // Refused cancellations need operator attention beyond
                    // the OUT record; one event carries both so a crash can
                    // never separate them.
                    self.anomalies.push(AnomalyRecord {
                        seq,
                        at,
                        context: "withdraw".into(),
                        message: format!("withdraw of {access_key} refused with code {code}"),
                        source: None,
                    });
                }
                self.resolve_intents(|i| {
                    matches!(i, DispatchIntent::Withdraw { access_key: k, .. } if k == access_key)
                });
            }

            AppliedResult::NumberingOutcome {
                establishment,
                series,
                from,
                to,
                code,
                access_keys,
            } => {
                let cause = if *code == 102 {
                    LifecycleEvent::NumberingApproved
                } else {
                    LifecycleEvent::NumberingRejected
                };
                for key in access_keys {
                    self.plan(key, cause)?;
                }
                for key in access_keys {
                    self.commit(key, seq, at, cause, Some(*code), None);
                    let status = self.docs[key].document.status;
                    self.out_lines.push(OutLine {
                        seq,
                        date: at.date(),
                        text: format!("RESULT|{key}|{code}|{status}||{}", at.to_rfc3339()),
                    });
                }
                if *code != 102 {
                    self.anomalies.push(AnomalyRecord {
                        seq,
                        at,
                        context: "withdraw-numbering".into(),
                        message: format!(
                            "numbering withdrawal {establishment} series {series} \
                             {from}-{to} refused with code {code}"
                        ),
                        source: None,
                    });
                }
                self.resolve_intents(|i| {
                    matches!(
                        i,
                        DispatchIntent::WithdrawNumbering {
                            establishment: e,
                            series: s,
                            from: f,
                            to: t,
                            ..
                        } if e == establishment && s == series && f == from && t == to
                    )
                });
            }

            AppliedResult::TrackConfirm {
                access_key,
                code,
                matches,
            } => {
                let local = self.require_doc(access_key)?.status();
                self.docs.get_mut(access_key).unwrap().track_confirmed = true;
                if !matches {
                    self.anomalies.push(AnomalyRecord {
                        seq,
                        at,
                        context: "track".into(),
                        message: format!(
                            "authority answered {code} for {access_key} \
                             while local status is {local}"
                        ),
                        source: None,
                    });
                }
            }

            AppliedResult::LocalRefusal {
                access_key,
                code,
                operation: _,
                status,
                source,
            } => {
                self.claim_source(source)?;
                let shown = status.map_or("Unknown", |s| s.as_str());
                self.out_lines.push(OutLine {
                    seq,
                    date: at.date(),
                    text: format!("RESULT|{access_key}|{code}|{shown}||{}", at.to_rfc3339()),
                });
            }
        }
        Ok(())
    }

    fn require_doc(&self, access_key: &str) -> Result<&DocRecord, StateError> {
        self.docs
            .get(access_key)
            .ok_or_else(|| StateError::UnknownDocument(access_key.to_string()))
    }

    fn require_batch(&self, batch_id: u64) -> Result<&BatchRecord, StateError> {
        self.batches
            .get(&batch_id)
            .ok_or(StateError::UnknownBatch(batch_id))
    }

    fn plan(
        &self,
        access_key: &str,
        cause: LifecycleEvent,
    ) -> Result<(LifecycleStatus, LifecycleStatus), StateError> {
        let from = self.require_doc(access_key)?.status();
        let to = transition(from, cause).map_err(|source| StateError::Transition {
            access_key: access_key.to_string(),
            source,
        })?;
        Ok((from, to))
    }

    /// Applies a pre-validated transition and records history.
    fn commit(
        &mut self,
        access_key: &str,
        seq: u64,
        at: Timestamp,
        cause: LifecycleEvent,
        code: Option<u16>,
        note: Option<String>,
    ) {
        let doc = self.docs.get_mut(access_key).expect("planned");
        let from = doc.document.status;
        let to = transition(from, cause).expect("planned");
        doc.document.status = to;
        if code.is_some() {
            doc.last_code = code;
        }
        doc.history.push(HistoryEntry {
            seq,
            at,
            cause,
            from,
            to,
            code,
            note,
        });
    }

    fn claim_source(&mut self, source: &Option<IngestSource>) -> Result<(), StateError> {
        if let Some(src) = source {
            if !self.ingested.insert((src.file.clone(), src.line)) {
                return Err(StateError::DuplicateSource {
                    file: src.file.clone(),
                    line: src.line,
                });
            }
        }
        Ok(())
    }

    fn resolve_intents<F: Fn(&DispatchIntent) -> bool>(&mut self, matches: F) {
        for record in &mut self.intents {
            if !record.resolved && matches(&record.intent) {
                record.resolved = true;
            }
        }
    }
}

fn result_cause(code: u16) -> LifecycleEvent {
    if code == 100 {
        LifecycleEvent::ResultApproved
    } else {
        LifecycleEvent::ResultRejected
    }
}

/// Document filter for queries; every field optional, conjunctive.
#[derive(Debug, Clone, Default)]
pub struct Filter {
    pub status: Option<LifecycleStatus>,
    pub establishment: Option<String>,
    pub access_key: Option<String>,
    /// Half-open ingest-time range [from, to).
    pub from: Option<Timestamp>,
    pub to: Option<Timestamp>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DayCounts {
    pub issued: u64,
    pub approved: u64,
    pub rejected: u64,
    pub cancelled: u64,
}

impl State {
    pub fn query(&self, filter: &Filter) -> Vec<&DocRecord> {
        self.docs
            .values()
            .filter(|d| {
                filter.status.is_none_or(|s| d.status() == s)
                    && filter
                        .establishment
                        .as_deref()
                        .is_none_or(|e| d.document.establishment.as_str() == e)
                    && filter
                        .access_key
                        .as_deref()
                        .is_none_or(|k| d.document.access_key.as_str() == k)
                    && filter.from.is_none_or(|t| d.ingested_at >= t)
                    && filter.to.is_none_or(|t| d.ingested_at < t)
            })
            .collect()
    }

    /// Per-day counters: issued by ingest day; approved/rejected/cancelled by
    /// the day the document entered that status.
    pub fn counts(
        &self,
        from: Option<Timestamp>,
        to: Option<Timestamp>,
    ) -> BTreeMap<String, DayCounts> {
        let in_range =
            |t: Timestamp| from.is_none_or(|f| t >= f) && to.is_none_or(|u| t < u);
        let mut table: BTreeMap<String, DayCounts> = BTreeMap::new();
        for doc in self.docs.values() {
            if in_range(doc.ingested_at) {
                table.entry(doc.ingested_at.date()).or_default().issued += 1;
            }
            for h in &doc.history {
                if !in_range(h.at) {
                    continue;
                }
                let row = table.entry(h.at.date()).or_default();
                match h.to {
                    LifecycleStatus::Approved
                        if h.cause == LifecycleEvent::ResultApproved =>
                    {
                        row.approved += 1
                    }
                    LifecycleStatus::Rejected => row.rejected += 1,
                    LifecycleStatus::Cancelled => row.cancelled += 1,
                    _ => {}
                }
            }
        }
        table
    }
}
