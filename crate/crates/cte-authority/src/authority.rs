//! The authority: envelope validation, the FIFO batch pipeline, and the
//! five synchronous services.
//!
//! All state lives behind one mutex, so concurrent callers linearize and
//! the FIFO contract is exactly the order receipts were issued. Processing
//! is pull-based: `process_next` completes the head batch once its
//! configured delay has elapsed.

use std::collections::{HashMap, HashSet, VecDeque};

use parking_lot::Mutex;
use sha2::{Digest, Sha256};

use cte_core::codes::code;
use cte_core::{
    decode_request, encode_response, parse_batch, verify, AccessKey, BatchResultBody,
    CTeDocument, Certificate, CorrectRequest, ReceiptBody, ReceiptNumber, ResultCode,
    ServiceKind, ServiceStatusBody, Timestamp, TrackBatchRequest, TrackCteRequest,
    WithdrawNumberingRequest, WithdrawRequest, MAX_BYTES, MAX_DOCS,
};

use crate::metrics::{ReceiptMint, ResponseWindow};
use crate::registry::{DocState, Registry, VoidedRange};

/// Approval is the rehearsal endpoint; Production requires enablement,
/// which approval of one full batch grants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Environment {
    Approval,
    Production,
}

impl Environment {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "approval" => Some(Environment::Approval),
            "production" => Some(Environment::Production),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Environment::Approval => "approval",
            Environment::Production => "production",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AuthorityConfig {
    pub environment: Environment,
    /// Federation unit of the receiving endpoint; stamps receipts.
    pub place: cte_core::Uf,
    /// Minimum time a batch sits before process_next will complete it.
    pub processing_delay_ms: u64,
}

impl Default for AuthorityConfig {
    fn default() -> Self {
        AuthorityConfig {
            environment: Environment::Approval,
            place: cte_core::Uf::new(35).expect("35 is a federation unit"),
            processing_delay_ms: 0,
        }
    }
}

struct QueueEntry {
    receipt: ReceiptNumber,
    received_at: Timestamp,
    cert_ref: String,
    /// Environment the batch was received under; enablement is judged by
    /// this, not by the environment at processing time.
    environment: Environment,
    establishment: String,
    documents: Vec<CTeDocument>,
}

/// A completed batch, retained in the output queue for at least 24 hours.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputEntry {
    pub receipt: ReceiptNumber,
    pub received_at: Timestamp,
    pub completed_at: Timestamp,
    pub batch_code: u16,
    pub per_document: Vec<(String, u16)>,
}

pub const RETENTION_MS: u64 = 24 * 60 * 60 * 1000;

struct Inner {
    environment: Environment,
    processing_delay_ms: u64,
    certificates: HashMap<String, Certificate>,
    enabled: HashSet<String>,
    queue: VecDeque<QueueEntry>,
    outputs: HashMap<String, OutputEntry>,
    /// (cert_ref, SHA-256 of batch bytes) -> receipt already issued, so a
    /// retransmitted batch gets its original receipt back.
    dedup: HashMap<(String, [u8; 32]), (ReceiptNumber, Timestamp)>,
    registry: Registry,
    window: ResponseWindow,
    mint: ReceiptMint,
}

pub struct Authority {
    inner: Mutex<Inner>,
}

impl Authority {
    pub fn new(config: AuthorityConfig) -> Self {
        Authority {
            inner: Mutex::new(Inner {
                environment: config.environment,
                processing_delay_ms: config.processing_delay_ms,
                certificates: HashMap::new(),
                enabled: HashSet::new(),
                queue: VecDeque::new(),
                outputs: HashMap::new(),
                dedup: HashMap::new(),
                registry: Registry::default(),
                window: ResponseWindow::default(),
                mint: ReceiptMint::new(config.place),
            }),
        }
    }

    /// Registers a client certificate; its wire reference is the hex key id.
    pub fn register_certificate(&self, cert: Certificate) {
        let cert_ref = hex::encode(&cert.key_id);
        self.inner.lock().certificates.insert(cert_ref, cert);
    }

    pub fn set_environment(&self, environment: Environment) {
        self.inner.lock().environment = environment;
    }

    pub fn environment(&self) -> Environment {
        self.inner.lock().environment
    }

    pub fn is_enabled_for_production(&self, cnpj: &str) -> bool {
        self.inner.lock().enabled.contains(cnpj)
    }

    pub fn queue_depth(&self) -> usize {
        self.inner.lock().queue.len()
    }

    pub fn output(&self, receipt: &str) -> Option<OutputEntry> {
        self.inner.lock().outputs.get(receipt).cloned()
    }

    pub fn average_ms(&self, now: Timestamp) -> Option<u64> {
        self.inner.lock().window.average_ms(now)
    }

    /// Full request cycle for one service endpoint: decode the envelope, run
    /// the shared certificate pipeline, dispatch. Always returns a response
    /// envelope.
    pub fn handle(&self, service: ServiceKind, request: &[u8], now: Timestamp) -> Vec<u8> {
        let envelope = match decode_request(request) {
            Ok(e) => e,
            Err(err) => return encode_response(&err.0, b""),
        };
        if envelope.service != service {
            return respond(
                code::XML_MALFORMED,
                "envelope service does not match the endpoint",
            );
        }

        let mut inner = self.inner.lock();
        let cert = match inner.certificates.get(&envelope.cert_ref) {
            None => return respond(code::CERT_INVALID, "unknown certificate reference"),
            Some(c) => c.clone(),
        };
        if cert.revoked {
            return coded(code::CERT_REVOKED);
        }
        if now < cert.not_before || now > cert.not_after {
            return coded(code::CERT_OVERDUE);
        }
        if inner.environment == Environment::Production
            && !inner.enabled.contains(cert.subject_cnpj.as_str())
        {
            return respond(
                code::CERT_PREREQUISITES,
                "establishment not enabled for the production environment",
            );
        }

        match service {
            ServiceKind::SendBatch => {
                inner.receive_batch(&envelope.body, &envelope.cert_ref, &cert, now)
            }
            ServiceKind::TrackBatch => inner.track_batch(&envelope.body),
            ServiceKind::WithdrawCte => inner.withdraw(&envelope.body),
            ServiceKind::WithdrawNumbering => inner.withdraw_numbering(&envelope.body),
            ServiceKind::TrackCteStatus => inner.track_cte_status(&envelope.body),
            ServiceKind::CorrectCte => inner.correct(&envelope.body),
            ServiceKind::TrackServiceStatus => inner.service_status(&envelope.body, now),
        }
    }

    /// Completes the head batch if one is ready; FIFO by construction.
    pub fn process_next(&self, now: Timestamp) -> Option<OutputEntry> {
        let mut inner = self.inner.lock();
        let ready = inner
            .queue
            .front()
            .is_some_and(|e| now.as_ms() >= e.received_at.as_ms() + inner.processing_delay_ms);
        if !ready {
            return None;
        }
        let entry = inner.queue.pop_front().expect("front checked");
        Some(inner.complete(entry, now))
    }

    /// Processes every batch that is ready at `now`; returns how many.
    pub fn process_all(&self, now: Timestamp) -> usize {
        let mut n = 0;
        while self.process_next(now).is_some() {
            n += 1;
        }
        n
    }

    /// Drops output entries older than the 24-hour retention floor.
    pub fn purge_output(&self, now: Timestamp) -> usize {
        let mut inner = self.inner.lock();
        let before = inner.outputs.len();
        inner
            .outputs
            .retain(|_, e| e.completed_at.as_ms() + RETENTION_MS > now.as_ms());
        before - inner.outputs.len()
    }
}

fn coded(code_value: u16) -> Vec<u8> {
    encode_response(&ResultCode::known(code_value), b"")
}

fn respond(code_value: u16, message: &str) -> Vec<u8> {
    encode_response(&ResultCode::with_message(code_value, message), b"")
}

impl Inner {
    fn receive_batch(
        &mut self,
        body: &[u8],
        cert_ref: &str,
        cert: &Certificate,
        now: Timestamp,
    ) -> Vec<u8> {
        let parsed = match parse_batch(body) {
            Ok(p) => p,
            Err(e) => return respond(code::XML_MALFORMED, &format!("batch does not parse: {e}")),
        };
        if parsed.documents.len() > MAX_DOCS {
            return coded(code::BATCH_TOO_MANY_DOCS);
        }
        if body.len() > MAX_BYTES {
            return coded(code::BATCH_TOO_LARGE);
        }
        if parsed
            .documents
            .iter()
            .any(|d| d.establishment.as_str() != parsed.establishment)
        {
            return coded(code::MIXED_ESTABLISHMENTS);
        }
        if cert.subject_cnpj.as_str() != parsed.establishment {
            return respond(
                code::CERT_CNPJ_MISMATCH,
                "certificate subject differs from batch establishment",
            );
        }

        let digest: [u8; 32] = Sha256::digest(body).into();
        let dedup_key = (cert_ref.to_string(), digest);
        if let Some((receipt, received_at)) = self.dedup.get(&dedup_key) {
            let receipt_body = ReceiptBody {
                number: receipt.clone(),
                received_at: *received_at,
                place: self.mint.place().as_str(),
                avg_ms: self.window.average_ms(now),
            };
            return encode_response(&ResultCode::known(code::BATCH_RECEIVED), &receipt_body.encode());
        }

        let receipt = self.mint.next(now);
        self.dedup.insert(dedup_key, (receipt.clone(), now));
        self.queue.push_back(QueueEntry {
            receipt: receipt.clone(),
            received_at: now,
            cert_ref: cert_ref.to_string(),
            environment: self.environment,
            establishment: parsed.establishment.clone(),
            documents: parsed.documents,
        });
        let receipt_body = ReceiptBody {
            number: receipt,
            received_at: now,
            place: self.mint.place().as_str(),
            avg_ms: self.window.average_ms(now),
        };
        encode_response(&ResultCode::known(code::BATCH_RECEIVED), &receipt_body.encode())
    }

    fn complete(&mut self, entry: QueueEntry, now: Timestamp) -> OutputEntry {
        let cert = self
            .certificates
            .get(&entry.cert_ref)
            .cloned()
            .expect("certificates are never deregistered");
        let mut per_document = Vec::with_capacity(entry.documents.len());
        let mut all_approved = true;
        for doc in &entry.documents {
            let doc_code = self.validate_document(doc, &cert);
            if doc_code == code::DOC_APPROVED {
                self.registry.register_approved(
                    doc.access_key.as_str().to_string(),
                    doc.establishment.as_str().to_string(),
                    doc.series.clone(),
                    doc.number.parse().expect("nine digits"),
                );
            } else {
                all_approved = false;
            }
            per_document.push((doc.access_key.as_str().to_string(), doc_code));
        }
        if all_approved && entry.environment == Environment::Approval {
            self.enabled.insert(entry.establishment.clone());
        }
        let output = OutputEntry {
            receipt: entry.receipt.clone(),
            received_at: entry.received_at,
            completed_at: now,
            batch_code: code::BATCH_PROCESSED,
            per_document,
        };
        self.window.record(entry.received_at, now);
        self.outputs
            .insert(entry.receipt.as_str().to_string(), output.clone());
        output
    }

    /// Per-document semantic validation; the code of the first failed check.
    fn validate_document(&self, doc: &CTeDocument, cert: &Certificate) -> u16 {
        let Some(signature) = &doc.signature else {
            return code::CERT_INVALID;
        };
        if !verify(doc, signature, cert) {
            return code::CERT_INVALID;
        }
        if !doc.establishment.check_digits_valid() {
            return code::CERT_CNPJ_MISMATCH;
        }
        if doc.establishment.as_str() != cert.subject_cnpj.as_str() {
            return code::CERT_CNPJ_MISMATCH;
        }
        if !doc.key_consistent() {
            return code::XML_MALFORMED;
        }
        let number: u32 = doc.number.parse().expect("nine digits");
        if self
            .registry
            .is_number_voided(doc.establishment.as_str(), &doc.series, number)
        {
            return code::ILLEGAL_STATE;
        }
        if self.registry.contains(doc.access_key.as_str()) {
            return code::DUPLICATE_KEY;
        }
        code::DOC_APPROVED
    }

    fn track_batch(&mut self, body: &[u8]) -> Vec<u8> {
        let request = match TrackBatchRequest::parse(body) {
            Ok(r) => r,
            Err(e) => return respond(code::XML_MALFORMED, &e.to_string()),
        };
        if let Some(output) = self.outputs.get(&request.receipt) {
            let result = BatchResultBody {
                receipt: output.receipt.as_str().to_string(),
                completed_at: output.completed_at,
                batch_code: output.batch_code,
                per_document: output.per_document.clone(),
            };
            return encode_response(
                &ResultCode::known(code::BATCH_PROCESSED),
                &result.encode(),
            );
        }
        if self
            .queue
            .iter()
            .any(|e| e.receipt.as_str() == request.receipt)
        {
            return coded(code::BATCH_PROCESSING);
        }
        respond(code::NOT_FOUND, "receipt unknown or expired")
    }

    fn withdraw(&mut self, body: &[u8]) -> Vec<u8> {
        let request = match WithdrawRequest::parse(body) {
            Ok(r) => r,
            Err(e) => return respond(code::XML_MALFORMED, &e.to_string()),
        };
        if request.reason.chars().count() < 15 {
            return respond(code::XML_MALFORMED, "reason shorter than 15 characters");
        }
        match self.registry.get(&request.access_key) {
            None => coded(code::NOT_FOUND),
            Some(doc) if doc.state == DocState::Approved => {
                self.registry.cancel(&request.access_key);
                coded(code::CANCEL_APPROVED)
            }
            Some(_) => coded(code::ILLEGAL_STATE),
        }
    }

    fn withdraw_numbering(&mut self, body: &[u8]) -> Vec<u8> {
        let request = match WithdrawNumberingRequest::parse(body) {
            Ok(r) => r,
            Err(e) => return respond(code::XML_MALFORMED, &e.to_string()),
        };
        if request.from > request.to {
            return respond(code::XML_MALFORMED, "empty numbering range");
        }
        if request.reason.chars().count() < 15 {
            return respond(code::XML_MALFORMED, "reason shorter than 15 characters");
        }
        if self.registry.range_ever_used(
            &request.establishment,
            &request.series,
            request.from,
            request.to,
        ) {
            return coded(code::ILLEGAL_STATE);
        }
        self.registry.void_range(VoidedRange {
            establishment: request.establishment,
            series: request.series,
            from: request.from,
            to: request.to,
        });
        coded(code::NUMBERING_CANCEL_APPROVED)
    }

    fn track_cte_status(&self, body: &[u8]) -> Vec<u8> {
        let request = match TrackCteRequest::parse(body) {
            Ok(r) => r,
            Err(e) => return respond(code::XML_MALFORMED, &e.to_string()),
        };
        if let Some(doc) = self.registry.get(&request.access_key) {
            return match doc.state {
                DocState::Approved => coded(code::DOC_APPROVED),
                DocState::Cancelled => coded(code::CANCEL_APPROVED),
            };
        }
        if let Ok(key) = AccessKey::parse(&request.access_key) {
            let number: u32 = key.number().parse().expect("nine digits");
            if self
                .registry
                .is_number_voided(key.issuer_digits(), key.series(), number)
            {
                return coded(code::NUMBERING_CANCEL_APPROVED);
            }
        }
        coded(code::NOT_FOUND)
    }

    fn correct(&mut self, body: &[u8]) -> Vec<u8> {
        let request = match CorrectRequest::parse(body) {
            Ok(r) => r,
            Err(e) => return respond(code::XML_MALFORMED, &e.to_string()),
        };
        if request.text.is_empty() {
            return respond(code::XML_MALFORMED, "empty correction text");
        }
        match self.registry.get(&request.access_key) {
            None => coded(code::NOT_FOUND),
            Some(doc) if doc.state == DocState::Approved => {
                self.registry
                    .add_correction(&request.access_key, request.text);
                coded(code::CORRECTION_REGISTERED)
            }
            Some(_) => coded(code::ILLEGAL_STATE),
        }
    }

    fn service_status(&self, body: &[u8], now: Timestamp) -> Vec<u8> {
        if let Err(e) = cte_core::parse_service_status_request(body) {
            return respond(code::XML_MALFORMED, &e.to_string());
        }
        let status = ServiceStatusBody {
            depth: self.queue.len() as u64,
            avg_ms: self.window.average_ms(now),
        };
        encode_response(&ResultCode::known(code::SERVICE_OK), &status.encode())
    }
}
