//! Core domain model for the CT-e integration gateway: documents and their
//! identifiers, the lifecycle state machine, certificates and signatures,
//! canonical XML, batch packing, and the wire-level protocol types shared by
//! the gateway and the authority.

pub mod access_key;
pub mod batch;
pub mod cert;
pub mod clock;
pub mod cnpj;
pub mod document;
pub mod lifecycle;
pub mod uf;
pub mod wire;
pub mod xml;

pub use access_key::{verify_access_key, AccessKey, AccessKeyError};
pub use batch::{
    pack, parse_batch, serialize_batch, Batch, OversizedDocument, PackError, PackOutcome,
    ParsedBatch, MAX_BYTES, MAX_DOCS,
};
pub use cert::{sign, verify, Certificate, CertificateError, SignError, Signature};
pub use clock::{Clock, ClockError, SystemClock, Timestamp, VirtualClock};
pub use cnpj::{validate_cnpj, Cnpj, CnpjError};
pub use document::{CTeDocument, DocumentError, Modal};
pub use lifecycle::{transition, IllegalTransition, LifecycleEvent, LifecycleStatus};
pub use uf::{Uf, UfError};
pub use wire::bodies::{
    encode_service_status_request, parse_service_status_request, BatchResultBody, CorrectRequest,
    ReceiptBody, ServiceStatusBody, TrackBatchRequest, TrackCteRequest, WithdrawNumberingRequest,
    WithdrawRequest,
};
pub use wire::codes::{self, Category, ResultCode};
pub use wire::envelope::{
    decode_request, decode_response, encode_request, encode_response, DecodedResponse,
    EnvelopeError, RequestContext, RequestEnvelope, PROTOCOL_VERSION,
};
pub use wire::receipt::{ReceiptError, ReceiptNumber};
pub use wire::transport::{Transport, TransportError};
pub use wire::ServiceKind;
pub use xml::{parse_document, serialize_document, serialize_document_unsigned, XmlError};
