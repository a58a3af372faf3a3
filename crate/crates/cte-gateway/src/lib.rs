//! The integration gateway: ingest, dispatch, tracking, recovery.
//!
//! A gateway owns one journal, one IN directory, and one OUT directory,
//! and advances in ticks. Each tick scans IN for new TXT lines, packs and
//! transmits batches, resolves pending cancellations, polls batch results,
//! and confirms approvals. Every fact is journaled before the effect that
//! depends on it, so a crash between any two effects recovers to the exact
//! state a crash-free run reaches: replay the journal, reconcile the OUT
//! files against it, and rerun the tick (already-performed steps dedup
//! against journaled state, and the authority dedups repeated sends).

pub mod config;
pub mod dacte;
pub mod hooks;
pub mod ingest;
pub mod outputs;
pub mod transport;

use std::collections::HashSet;
use std::fs;
use std::sync::Arc;

use serde::Serialize;

use cte_core::codes::code;
use cte_core::{
    decode_response, encode_request, pack, serialize_batch, Batch, BatchResultBody, CTeDocument,
    Category, Cnpj, LifecycleEvent, LifecycleStatus, ReceiptBody, RequestContext, ServiceKind,
    Signature, Timestamp, TrackBatchRequest, TrackCteRequest, Transport, WithdrawNumberingRequest,
    WithdrawRequest, MAX_BYTES, PROTOCOL_VERSION,
};
use cte_store::{
    AppliedResult, DispatchIntent, EventBody, IngestSource, State, Store, StoreError,
};

pub use config::{ConfigError, GatewayConfig, TargetEnvironment};
pub use hooks::{EffectHooks, Interrupted, NoHooks};
pub use transport::HttpTransport;

#[derive(Debug, thiserror::Error)]
pub enum OpenError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot prepare gateway directories: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, thiserror::Error)]
pub enum TickError {
    #[error(transparent)]
    Interrupted(#[from] Interrupted),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("output write failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, thiserror::Error)]
pub enum DacteError {
    #[error("unknown document {0}")]
    Unknown(String),
    #[error("document {access_key} is {status}, not approved")]
    NotApproved {
        access_key: String,
        status: LifecycleStatus,
    },
}

/// What one tick did, stage by stage.
#[derive(Debug, Default, Clone, PartialEq, Eq, Serialize)]
pub struct TickReport {
    pub files_scanned: usize,
    pub unreadable_files: usize,
    pub docs_ingested: usize,
    pub parse_errors: usize,
    pub local_refusals: usize,
    pub cancel_requests: usize,
    pub numbering_requests: usize,
    pub batches_created: usize,
    pub batches_sent: usize,
    pub batches_rejected: usize,
    pub withdrawals_resolved: usize,
    pub numbering_resolved: usize,
    pub batches_polled: usize,
    pub batches_completed: usize,
    pub docs_approved: usize,
    pub docs_rejected: usize,
    pub dactes_rendered: usize,
    pub confirmations: usize,
    pub track_mismatches: usize,
    pub anomalies: usize,
    pub transport_failures: usize,
    pub protocol_errors: usize,
    pub out_lines: usize,
}

pub struct Gateway {
    config: GatewayConfig,
    store: Store,
    transport: Arc<dyn Transport>,
    hooks: Arc<dyn EffectHooks>,
    outputs: outputs::OutputWriter,
    ctx: RequestContext,
    /// Seqs of intents journaled during the current tick. Fresh intents
    /// dispatch directly; leftovers found at recovery go through a status
    /// probe first, because the original send may already have landed.
    fresh_intents: HashSet<u64>,
}

impl Gateway {
    pub fn open(config: GatewayConfig, transport: Arc<dyn Transport>) -> Result<Self, OpenError> {
        Self::open_with_hooks(config, transport, Arc::new(NoHooks))
    }

    pub fn open_with_hooks(
        config: GatewayConfig,
        transport: Arc<dyn Transport>,
        hooks: Arc<dyn EffectHooks>,
    ) -> Result<Self, OpenError> {
        fs::create_dir_all(&config.in_dir)?;
        fs::create_dir_all(&config.out_dir)?;
        if let Some(parent) = config.journal_path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        let store = Store::open(&config.journal_path, &config.snapshot_path)?;
        let ctx = RequestContext {
            version: PROTOCOL_VERSION.to_string(),
            uf: config.uf,
            cert_ref: config.certificate.key_id_hex(),
        };
        let outputs = outputs::OutputWriter::new(&config.out_dir);
        let gateway = Gateway {
            config,
            store,
            transport,
            hooks,
            outputs,
            ctx,
            fresh_intents: HashSet::new(),
        };
        gateway.reconcile_outputs()?;
        Ok(gateway)
    }

    pub fn state(&self) -> &State {
        self.store.state()
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    /// Renders the slip for a currently approved document.
    pub fn render_dacte(&self, access_key: &str) -> Result<String, DacteError> {
        let doc = self
            .store
            .state()
            .doc(access_key)
            .ok_or_else(|| DacteError::Unknown(access_key.to_string()))?;
        if doc.status() != LifecycleStatus::Approved {
            return Err(DacteError::NotApproved {
                access_key: access_key.to_string(),
                status: doc.status(),
            });
        }
        Ok(dacte::render(&doc.document, &self.receipt_of(doc)))
    }

    /// One full tick. Stage order matters: new input first, then sends,
    /// then cancellations, then polling, then confirmation, so a document
    /// ingested now can be transmitted in the same tick.
    pub fn tick(&mut self, now: Timestamp) -> Result<TickReport, TickError> {
        self.fresh_intents.clear();
        let mut report = TickReport::default();
        self.scan_in(now, &mut report)?;
        self.run_send_flow(now, &mut report)?;
        self.run_withdraw_flow(now, &mut report)?;
        self.run_withdraw_numbering_flow(now, &mut report)?;
        self.poll_pending(now, &mut report)?;
        self.track_approved(now, &mut report)?;
        self.hooks.before_effect("tick-end")?;
        // the snapshot only accelerates replay; recovery works without it
        self.store.write_snapshot()?;
        Ok(report)
    }

    // ---- recovery ------------------------------------------------------

    /// Rebuilds OUT files that drifted from the journal. DACTE slips are
    /// re-rendered for every document that ever reached approval; the
    /// layout only reads immutable fields, so this converges on the same
    /// bytes the original approval-time write produced.
    fn reconcile_outputs(&self) -> Result<(), std::io::Error> {
        self.outputs.reconcile_results(self.store.state())?;
        for doc in self.store.state().docs().filter(|d| d.ever_approved()) {
            let rendered = dacte::render(&doc.document, &self.receipt_of(doc));
            let path = self.outputs.dacte_path(doc.document.access_key.as_str());
            if fs::read(&path).ok().as_deref() != Some(rendered.as_bytes()) {
                fs::write(&path, &rendered)?;
            }
        }
        Ok(())
    }

    fn receipt_of(&self, doc: &cte_store::DocRecord) -> String {
        doc.batch_id
            .and_then(|id| self.store.state().batch(id))
            .and_then(|b| b.receipt.clone())
            .expect("approved documents belong to a receipted batch")
    }

    // ---- stage 1: scan IN ----------------------------------------------

    fn scan_in(&mut self, now: Timestamp, report: &mut TickReport) -> Result<(), TickError> {
        let mut names: Vec<String> = Vec::new();
        let entries = match fs::read_dir(&self.config.in_dir) {
            Ok(e) => e,
            Err(_) => {
                report.unreadable_files += 1;
                return Ok(());
            }
        };
        for entry in entries.flatten() {
            let path = entry.path();
            if !path.is_file() {
                continue;
            }
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
                continue;
            };
            if name.ends_with(".done") || name.starts_with('.') {
                continue;
            }
            names.push(name.to_string());
        }
        names.sort();

        for name in names {
            let path = self.config.in_dir.join(&name);
            let text = match fs::read_to_string(&path) {
                Ok(t) => t,
                // unreadable now; left in place for the next tick
                Err(_) => {
                    report.unreadable_files += 1;
                    continue;
                }
            };
            for (idx, raw) in text.split('\n').enumerate() {
                let line_no = (idx + 1) as u64;
                let line = raw.strip_suffix('\r').unwrap_or(raw);
                if line.trim().is_empty() {
                    continue;
                }
                if self.store.state().is_ingested(&name, line_no) {
                    continue;
                }
                let source = IngestSource {
                    file: name.clone(),
                    line: line_no,
                };
                self.ingest_line(now, line, source, report)?;
            }
            self.hooks.before_effect("in-done")?;
            fs::rename(&path, self.config.in_dir.join(format!("{name}.done")))?;
            report.files_scanned += 1;
        }
        Ok(())
    }

    fn ingest_line(
        &mut self,
        now: Timestamp,
        line: &str,
        source: IngestSource,
        report: &mut TickReport,
    ) -> Result<(), TickError> {
        let parsed = match ingest::parse_line(line) {
            Ok(p) => p,
            Err(e) => {
                report.parse_errors += 1;
                return self.journal_anomaly(now, "parse", e.0, Some(source), report);
            }
        };
        match parsed {
            ingest::ParsedLine::Issue(rec) => self.ingest_issue(now, rec, source, report),
            ingest::ParsedLine::Cancel { access_key, reason } => {
                self.ingest_cancel(now, access_key, reason, source, report)
            }
            ingest::ParsedLine::CancelNumbering {
                establishment,
                series,
                from,
                to,
                reason,
            } => self.ingest_cancel_numbering(
                now,
                establishment,
                series,
                from,
                to,
                reason,
                source,
                report,
            ),
        }
    }

    fn ingest_issue(
        &mut self,
        now: Timestamp,
        rec: ingest::IssueLine,
        source: IngestSource,
        report: &mut TickReport,
    ) -> Result<(), TickError> {
        // the journaled document counter seeds the key's random field, so
        // replay reproduces the same keys in the same order
        let random = format!("{:08}", (self.store.state().doc_count() + 1) % 100_000_000);
        let built = CTeDocument::new(
            rec.establishment,
            &rec.series,
            &rec.number,
            rec.issued,
            rec.modal,
            rec.origin,
            rec.dest,
            rec.value_cents,
            &rec.cargo,
            &random,
        );
        let mut doc = match built {
            Ok(d) => d,
            Err(e) => {
                report.parse_errors += 1;
                return self.journal_anomaly(now, "parse", e.to_string(), Some(source), report);
            }
        };
        if self.store.state().doc(doc.access_key.as_str()).is_some() {
            report.parse_errors += 1;
            let message = format!("access key {} already issued", doc.access_key.as_str());
            return self.journal_anomaly(now, "parse", message, Some(source), report);
        }
        // mechanical signing: a mistyped issuer CNPJ must still travel to
        // the authority, where it fails the certificate/establishment match
        doc.signature = Some(Signature::compute(&doc, &self.config.certificate));
        self.journal(
            "journal-doc",
            now,
            EventBody::DocUpserted {
                document: doc,
                source: Some(source),
            },
            report,
        )?;
        report.docs_ingested += 1;
        Ok(())
    }

    fn ingest_cancel(
        &mut self,
        now: Timestamp,
        access_key: String,
        reason: String,
        source: IngestSource,
        report: &mut TickReport,
    ) -> Result<(), TickError> {
        let status = self.store.state().doc(&access_key).map(|d| d.status());
        if status == Some(LifecycleStatus::Approved) {
            let seq = self.journal(
                "journal-intent",
                now,
                EventBody::DispatchIntent {
                    intent: DispatchIntent::Withdraw {
                        access_key,
                        reason,
                        source: Some(source),
                    },
                },
                report,
            )?;
            self.fresh_intents.insert(seq);
            report.cancel_requests += 1;
        } else {
            report.local_refusals += 1;
            self.journal(
                "journal-refusal",
                now,
                EventBody::ResultApplied {
                    result: AppliedResult::LocalRefusal {
                        access_key,
                        code: code::ILLEGAL_STATE,
                        operation: "withdraw".into(),
                        status,
                        source: Some(source),
                    },
                },
                report,
            )?;
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn ingest_cancel_numbering(
        &mut self,
        now: Timestamp,
        establishment: Cnpj,
        series: String,
        from: u32,
        to: u32,
        reason: String,
        source: IngestSource,
        report: &mut TickReport,
    ) -> Result<(), TickError> {
        enum Decision {
            Refuse {
                key: String,
                status: LifecycleStatus,
            },
            Dispatch {
                keys: Vec<String>,
            },
        }
        let decision = {
            let matching: Vec<&cte_store::DocRecord> = self
                .store
                .state()
                .docs()
                .filter(|d| {
                    d.document.establishment == establishment
                        && d.document.series == series
                        && d.document
                            .number
                            .parse::<u32>()
                            .is_ok_and(|n| n >= from && n <= to)
                })
                .collect();
            match matching.iter().find(|d| d.status() != LifecycleStatus::Draft) {
                Some(d) => Decision::Refuse {
                    key: d.document.access_key.as_str().to_string(),
                    status: d.status(),
                },
                None => Decision::Dispatch {
                    keys: matching
                        .iter()
                        .map(|d| d.document.access_key.as_str().to_string())
                        .collect(),
                },
            }
        };
        match decision {
            Decision::Refuse { key, status } => {
                report.local_refusals += 1;
                self.journal(
                    "journal-refusal",
                    now,
                    EventBody::ResultApplied {
                        result: AppliedResult::LocalRefusal {
                            access_key: key,
                            code: code::ILLEGAL_STATE,
                            operation: "withdraw-numbering".into(),
                            status: Some(status),
                            source: Some(source),
                        },
                    },
                    report,
                )?;
            }
            Decision::Dispatch { keys } => {
                let seq = self.journal(
                    "journal-intent",
                    now,
                    EventBody::DispatchIntent {
                        intent: DispatchIntent::WithdrawNumbering {
                            establishment: establishment.as_str().to_string(),
                            series,
                            from,
                            to,
                            reason,
                            access_keys: keys,
                            source: Some(source),
                        },
                    },
                    report,
                )?;
                self.fresh_intents.insert(seq);
                report.numbering_requests += 1;
            }
        }
        Ok(())
    }

    // ---- stage 2: pack and send ----------------------------------------

    fn run_send_flow(&mut self, now: Timestamp, report: &mut TickReport) -> Result<(), TickError> {
        let mut drafts: Vec<CTeDocument> = self
            .store
            .state()
            .docs()
            .filter(|d| d.status() == LifecycleStatus::Draft && d.batch_id.is_none())
            .map(|d| d.document.clone())
            .collect();
        // sorted by establishment first: packing then visits establishment
        // groups in an order that a partially journaled packing run cannot
        // disturb, so recovery repacks the leftovers into the same batches
        drafts.sort_by(|a, b| {
            (a.establishment.as_str(), a.access_key.as_str())
                .cmp(&(b.establishment.as_str(), b.access_key.as_str()))
        });
        if !drafts.is_empty() {
            let first_id = self.store.state().next_batch_id();
            let outcome = pack(drafts, first_id).expect("stored drafts are signed drafts");
            for batch in &outcome.batches {
                self.journal(
                    "journal-batch",
                    now,
                    EventBody::BatchCreated {
                        batch_id: batch.batch_id,
                        establishment: batch.establishment.as_str().to_string(),
                        access_keys: batch
                            .documents
                            .iter()
                            .map(|d| d.access_key.as_str().to_string())
                            .collect(),
                        serialized_size: batch.serialized_size as u64,
                    },
                    report,
                )?;
                report.batches_created += 1;
            }
            // a document too large even alone gets a batch of its own, so
            // the size refusal lands in the journal instead of repacking
            // forever; the size is measured for the id the batch actually
            // gets, which keeps replays byte-exact
            for over in &outcome.oversized {
                let batch_id = self.store.state().next_batch_id();
                let single = Batch {
                    batch_id,
                    establishment: over.document.establishment.clone(),
                    documents: vec![over.document.clone()],
                    serialized_size: 0,
                    receipt: None,
                    result_code: None,
                };
                let serialized_size = serialize_batch(&single).len() as u64;
                self.journal(
                    "journal-batch",
                    now,
                    EventBody::BatchCreated {
                        batch_id,
                        establishment: over.document.establishment.as_str().to_string(),
                        access_keys: vec![over.document.access_key.as_str().to_string()],
                        serialized_size,
                    },
                    report,
                )?;
                report.batches_created += 1;
            }
        }

        let pending: Vec<u64> = self
            .store
            .state()
            .batches()
            .filter(|b| b.awaiting_send())
            .map(|b| b.batch_id)
            .collect();
        for batch_id in pending {
            self.dispatch_batch(now, batch_id, report)?;
        }
        Ok(())
    }

    fn dispatch_batch(
        &mut self,
        now: Timestamp,
        batch_id: u64,
        report: &mut TickReport,
    ) -> Result<(), TickError> {
        let record = self
            .store
            .state()
            .batch(batch_id)
            .expect("pending batch exists")
            .clone();
        if record.serialized_size > MAX_BYTES as u64 {
            // settled locally; the authority would refuse it the same way
            self.journal(
                "journal-result",
                now,
                EventBody::ResultApplied {
                    result: AppliedResult::BatchSync {
                        batch_id,
                        code: code::BATCH_TOO_LARGE,
                        message: "serialized batch exceeds the transmission limit".into(),
                    },
                },
                report,
            )?;
            report.batches_rejected += 1;
            return Ok(());
        }

        let has_intent = self.store.state().unresolved_intents().any(|i| {
            matches!(&i.intent, DispatchIntent::SendBatch { batch_id: b } if *b == batch_id)
        });
        if !has_intent {
            self.journal(
                "journal-intent",
                now,
                EventBody::DispatchIntent {
                    intent: DispatchIntent::SendBatch { batch_id },
                },
                report,
            )?;
        }

        // rebuild the exact bytes from stored documents; serialization
        // ignores lifecycle status, so these match the packed originals
        // and a resend after a crash dedups at the authority
        let state = self.store.state();
        let documents: Vec<CTeDocument> = record
            .access_keys
            .iter()
            .map(|k| state.doc(k).expect("batch member exists").document.clone())
            .collect();
        let batch = Batch {
            batch_id,
            establishment: Cnpj::parse_digits(&record.establishment)
                .expect("journaled establishment is digits"),
            documents,
            serialized_size: record.serialized_size as usize,
            receipt: None,
            result_code: None,
        };
        let payload = serialize_batch(&batch);
        let request = encode_request(ServiceKind::SendBatch, &payload, &self.ctx)
            .expect("batch payload is well-formed");

        self.hooks.before_effect("send-batch")?;
        let response = match self.transport.call(ServiceKind::SendBatch, &request) {
            Ok(r) => r,
            Err(_) => {
                report.transport_failures += 1;
                return Ok(());
            }
        };
        let decoded = decode_response(&response);
        if decoded.code.code == code::BATCH_RECEIVED {
            match ReceiptBody::parse(&decoded.body) {
                Ok(receipt) => {
                    self.journal(
                        "journal-receipt",
                        now,
                        EventBody::ReceiptRecorded {
                            batch_id,
                            receipt: receipt.number.as_str().to_string(),
                            received_at: receipt.received_at,
                            place: receipt.place,
                        },
                        report,
                    )?;
                    report.batches_sent += 1;
                }
                Err(_) => report.protocol_errors += 1,
            }
        } else {
            // every coded refusal settles the batch; only transport-level
            // failures retry
            self.journal(
                "journal-result",
                now,
                EventBody::ResultApplied {
                    result: AppliedResult::BatchSync {
                        batch_id,
                        code: decoded.code.code,
                        message: decoded.code.message,
                    },
                },
                report,
            )?;
            report.batches_rejected += 1;
        }
        Ok(())
    }

    // ---- stage 3: cancellations ----------------------------------------

    fn run_withdraw_flow(
        &mut self,
        now: Timestamp,
        report: &mut TickReport,
    ) -> Result<(), TickError> {
        let pending: Vec<(u64, String, String)> = self
            .store
            .state()
            .unresolved_intents()
            .filter_map(|i| match &i.intent {
                DispatchIntent::Withdraw {
                    access_key, reason, ..
                } => Some((i.seq, access_key.clone(), reason.clone())),
                _ => None,
            })
            .collect();

        for (seq, access_key, reason) in pending {
            if !self.fresh_intents.contains(&seq) {
                // leftover from an interrupted run: the withdraw may have
                // landed before the crash, so ask for the status first
                self.hooks.before_effect("send-track-status")?;
                let payload = TrackCteRequest {
                    access_key: access_key.clone(),
                }
                .encode();
                let request = encode_request(ServiceKind::TrackCteStatus, &payload, &self.ctx)
                    .expect("track payload is well-formed");
                match self.transport.call(ServiceKind::TrackCteStatus, &request) {
                    Err(_) => {
                        report.transport_failures += 1;
                        continue;
                    }
                    Ok(resp) => {
                        let decoded = decode_response(&resp);
                        if decoded.code.code == code::CANCEL_APPROVED {
                            self.journal(
                                "journal-result",
                                now,
                                EventBody::ResultApplied {
                                    result: AppliedResult::WithdrawOutcome {
                                        access_key,
                                        code: decoded.code.code,
                                        message: decoded.code.message,
                                    },
                                },
                                report,
                            )?;
                            report.withdrawals_resolved += 1;
                            continue;
                        }
                        if decoded.code.code != code::DOC_APPROVED {
                            // anything but a clean answer: retry next tick
                            report.protocol_errors += 1;
                            continue;
                        }
                    }
                }
            }

            self.hooks.before_effect("send-withdraw")?;
            let payload = WithdrawRequest {
                access_key: access_key.clone(),
                reason,
            }
            .encode();
            let request = encode_request(ServiceKind::WithdrawCte, &payload, &self.ctx)
                .expect("withdraw payload is well-formed");
            match self.transport.call(ServiceKind::WithdrawCte, &request) {
                Err(_) => report.transport_failures += 1,
                Ok(resp) => {
                    let decoded = decode_response(&resp);
                    match decoded.category() {
                        // a definitive answer settles the intent either way;
                        // certificate or connection trouble retries later
                        Category::Success | Category::E2Xml | Category::E4Semantic => {
                            self.journal(
                                "journal-result",
                                now,
                                EventBody::ResultApplied {
                                    result: AppliedResult::WithdrawOutcome {
                                        access_key,
                                        code: decoded.code.code,
                                        message: decoded.code.message,
                                    },
                                },
                                report,
                            )?;
                            report.withdrawals_resolved += 1;
                        }
                        _ => report.transport_failures += 1,
                    }
                }
            }
        }
        Ok(())
    }

    fn run_withdraw_numbering_flow(
        &mut self,
        now: Timestamp,
        report: &mut TickReport,
    ) -> Result<(), TickError> {
        type Pending = (String, String, u32, u32, String, Vec<String>);
        let pending: Vec<Pending> = self
            .store
            .state()
            .unresolved_intents()
            .filter_map(|i| match &i.intent {
                DispatchIntent::WithdrawNumbering {
                    establishment,
                    series,
                    from,
                    to,
                    reason,
                    access_keys,
                    ..
                } => Some((
                    establishment.clone(),
                    series.clone(),
                    *from,
                    *to,
                    reason.clone(),
                    access_keys.clone(),
                )),
                _ => None,
            })
            .collect();

        // no status probe here: re-voiding an already voided range answers
        // the same code again, so resending a leftover intent is idempotent
        for (establishment, series, from, to, reason, access_keys) in pending {
            self.hooks.before_effect("send-withdraw-numbering")?;
            let payload = WithdrawNumberingRequest {
                establishment: establishment.clone(),
                series: series.clone(),
                from,
                to,
                reason,
            }
            .encode();
            let request = encode_request(ServiceKind::WithdrawNumbering, &payload, &self.ctx)
                .expect("numbering payload is well-formed");
            match self.transport.call(ServiceKind::WithdrawNumbering, &request) {
                Err(_) => report.transport_failures += 1,
                Ok(resp) => {
                    let decoded = decode_response(&resp);
                    match decoded.category() {
                        Category::Success | Category::E2Xml | Category::E4Semantic => {
                            self.journal(
                                "journal-result",
                                now,
                                EventBody::ResultApplied {
                                    result: AppliedResult::NumberingOutcome {
                                        establishment,
                                        series,
                                        from,
                                        to,
                                        code: decoded.code.code,
                                        access_keys,
                                    },
                                },
                                report,
                            )?;
                            report.numbering_resolved += 1;
                        }
                        _ => report.transport_failures += 1,
                    }
                }
            }
        }
        Ok(())
    }

    // ---- stage 4: poll batch results -----------------------------------

    fn poll_pending(&mut self, now: Timestamp, report: &mut TickReport) -> Result<(), TickError> {
        let polls: Vec<(u64, String)> = self
            .store
            .state()
            .batches()
            .filter(|b| b.awaiting_result())
            .map(|b| {
                let receipt = b.receipt.clone().expect("awaiting_result implies receipt");
                (b.batch_id, receipt)
            })
            .collect();

        for (batch_id, receipt) in polls {
            self.hooks.before_effect("send-track-batch")?;
            let payload = TrackBatchRequest {
                receipt: receipt.clone(),
            }
            .encode();
            let request = encode_request(ServiceKind::TrackBatch, &payload, &self.ctx)
                .expect("track payload is well-formed");
            let response = match self.transport.call(ServiceKind::TrackBatch, &request) {
                Ok(r) => r,
                Err(_) => {
                    report.transport_failures += 1;
                    continue;
                }
            };
            report.batches_polled += 1;
            let decoded = decode_response(&response);
            match decoded.code.code {
                code::BATCH_PROCESSING => self.mark_processing(now, batch_id, report)?,
                code::BATCH_PROCESSED => {
                    let body = match BatchResultBody::parse(&decoded.body) {
                        Ok(b) => b,
                        Err(_) => {
                            report.protocol_errors += 1;
                            continue;
                        }
                    };
                    self.journal(
                        "journal-result",
                        now,
                        EventBody::ResultApplied {
                            result: AppliedResult::BatchOutcome {
                                batch_id,
                                receipt: receipt.clone(),
                                completed_at: body.completed_at,
                                per_doc: body.per_document.clone(),
                            },
                        },
                        report,
                    )?;
                    report.batches_completed += 1;
                    for (_, doc_code) in &body.per_document {
                        if *doc_code == code::DOC_APPROVED {
                            report.docs_approved += 1;
                        } else {
                            report.docs_rejected += 1;
                        }
                    }
                    self.render_new_dactes(&receipt, &body.per_document, report)?;
                }
                code::NOT_FOUND => {
                    // the authority no longer knows the receipt (retention
                    // expiry); flag it once and leave the batch for the
                    // operator
                    let context = format!("track-batch {receipt}");
                    let already = self
                        .store
                        .state()
                        .anomalies()
                        .iter()
                        .any(|a| a.context == context);
                    if !already {
                        report.anomalies += 1;
                        self.journal_anomaly(
                            now,
                            &context,
                            "receipt unknown at the authority; result lost to retention".into(),
                            None,
                            report,
                        )?;
                    }
                }
                _ => report.protocol_errors += 1,
            }
        }
        Ok(())
    }

    fn mark_processing(
        &mut self,
        now: Timestamp,
        batch_id: u64,
        report: &mut TickReport,
    ) -> Result<(), TickError> {
        let members: Vec<String> = {
            let state = self.store.state();
            state
                .batch(batch_id)
                .expect("polled batch exists")
                .access_keys
                .iter()
                .filter(|k| {
                    state
                        .doc(k)
                        .is_some_and(|d| d.status() == LifecycleStatus::Transmitted)
                })
                .cloned()
                .collect()
        };
        for access_key in members {
            self.journal(
                "journal-status",
                now,
                EventBody::StatusChanged {
                    access_key,
                    from: LifecycleStatus::Transmitted,
                    to: LifecycleStatus::Processing,
                    cause: LifecycleEvent::TrackingSaysProcessing,
                    note: None,
                },
                report,
            )?;
        }
        Ok(())
    }

    fn render_new_dactes(
        &mut self,
        receipt: &str,
        per_doc: &[(String, u16)],
        report: &mut TickReport,
    ) -> Result<(), TickError> {
        for (access_key, doc_code) in per_doc {
            if *doc_code != code::DOC_APPROVED {
                continue;
            }
            let doc = self
                .store
                .state()
                .doc(access_key)
                .expect("batch member exists");
            let rendered = dacte::render(&doc.document, receipt);
            if self
                .outputs
                .write_dacte(self.hooks.as_ref(), access_key, &rendered)?
            {
                report.dactes_rendered += 1;
            }
        }
        Ok(())
    }

    // ---- stage 5: confirm approvals ------------------------------------

    fn track_approved(
        &mut self,
        now: Timestamp,
        report: &mut TickReport,
    ) -> Result<(), TickError> {
        for access_key in self.store.state().approved_unconfirmed() {
            self.hooks.before_effect("send-track-status")?;
            let payload = TrackCteRequest {
                access_key: access_key.clone(),
            }
            .encode();
            let request = encode_request(ServiceKind::TrackCteStatus, &payload, &self.ctx)
                .expect("track payload is well-formed");
            match self.transport.call(ServiceKind::TrackCteStatus, &request) {
                Err(_) => report.transport_failures += 1,
                Ok(resp) => {
                    let decoded = decode_response(&resp);
                    match decoded.category() {
                        Category::Success | Category::E4Semantic => {
                            let matches = decoded.code.code == code::DOC_APPROVED;
                            self.journal(
                                "journal-result",
                                now,
                                EventBody::ResultApplied {
                                    result: AppliedResult::TrackConfirm {
                                        access_key,
                                        code: decoded.code.code,
                                        matches,
                                    },
                                },
                                report,
                            )?;
                            if matches {
                                report.confirmations += 1;
                            } else {
                                report.track_mismatches += 1;
                            }
                        }
                        _ => report.transport_failures += 1,
                    }
                }
            }
        }
        Ok(())
    }

    // ---- plumbing --------------------------------------------------------

    /// Hook, append, project: the one way an event enters the journal.
    /// OUT lines produced by the event are appended to their dated files
    /// immediately, so the projection trails the journal by at most one
    /// interrupted write (healed by reconciliation at open).
    fn journal(
        &mut self,
        label: &str,
        now: Timestamp,
        body: EventBody,
        report: &mut TickReport,
    ) -> Result<u64, TickError> {
        self.hooks.before_effect(label)?;
        let (seq, lines) = self.store.append(now, body)?;
        report.out_lines += lines.len();
        self.outputs.append(self.hooks.as_ref(), &lines)?;
        Ok(seq)
    }

    fn journal_anomaly(
        &mut self,
        now: Timestamp,
        context: &str,
        message: String,
        source: Option<IngestSource>,
        report: &mut TickReport,
    ) -> Result<(), TickError> {
        self.journal(
            "journal-anomaly",
            now,
            EventBody::Anomaly {
                context: context.to_string(),
                message,
                source,
            },
            report,
        )?;
        Ok(())
    }
}
