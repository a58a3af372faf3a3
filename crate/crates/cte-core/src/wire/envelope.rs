//! Request/response envelopes.
//!
//! Request: `<cteRequest service=".." version=".." uf=".." certRef="..">body</cteRequest>`.
//! Response: `<cteResponse code=".." message="..">body</cteResponse>`.
//! Bodies are opaque XML fragments owned by the individual services.
//! Decoding a request enforces the envelope-level contract (shape, version,
//! federation unit) and reports violations as result codes; decoding a
//! response is total, mapping malformed input to the XML-formatting code.

use quick_xml::escape::escape;
use quick_xml::events::Event;
use quick_xml::Reader;

use super::codes::{self, ResultCode};
use super::ServiceKind;
use crate::uf::Uf;
use crate::xml::{optional_attr, require_attr};

/// The protocol version this implementation speaks.
pub const PROTOCOL_VERSION: &str = "1.00";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestEnvelope {
    pub service: ServiceKind,
    pub version: String,
    pub uf: Uf,
    /// Certificate key id, lowercase hex.
    pub cert_ref: String,
    pub body: Vec<u8>,
}

/// Context for building a request.
#[derive(Debug, Clone)]
pub struct RequestContext {
    pub version: String,
    pub uf: Uf,
    pub cert_ref: String,
}

/// Envelope-level failure, already coded for the response.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("envelope error {}: {}", .0.code, .0.message)]
pub struct EnvelopeError(pub ResultCode);

impl EnvelopeError {
    fn malformed(detail: impl std::fmt::Display) -> Self {
        EnvelopeError(ResultCode::with_message(
            codes::code::XML_MALFORMED,
            format!("malformed envelope: {detail}"),
        ))
    }
}

/// Encodes a request envelope. The payload must be a non-empty well-formed
/// XML fragment; anything else is an XML-formatting error.
pub fn encode_request(
    service: ServiceKind,
    payload: &[u8],
    ctx: &RequestContext,
) -> Result<Vec<u8>, EnvelopeError> {
    check_fragment(payload)?;
    let mut s = String::with_capacity(payload.len() + 96);
    s.push_str("<cteRequest service=\"");
    s.push_str(service.wire_name());
    s.push_str("\" version=\"");
    s.push_str(&escape(ctx.version.as_str()));
    s.push_str("\" uf=\"");
    s.push_str(&ctx.uf.as_str());
    s.push_str("\" certRef=\"");
    s.push_str(&escape(ctx.cert_ref.as_str()));
    s.push_str("\">");
    let mut bytes = s.into_bytes();
    bytes.extend_from_slice(payload);
    bytes.extend_from_slice(b"</cteRequest>");
    Ok(bytes)
}

/// Decodes and validates a request envelope.
pub fn decode_request(bytes: &[u8]) -> Result<RequestEnvelope, EnvelopeError> {
    let text = std::str::from_utf8(bytes).map_err(|_| EnvelopeError::malformed("not UTF-8"))?;
    let mut reader = Reader::from_str(text);
    let start = match reader.read_event().map_err(EnvelopeError::malformed)? {
        Event::Start(e) if e.name().as_ref() == b"cteRequest" => e.into_owned(),
        other => {
            return Err(EnvelopeError::malformed(format!(
                "expected <cteRequest>, got {other:?}"
            )))
        }
    };

    let service_name =
        require_attr(&start, "service").map_err(|e| EnvelopeError::malformed(e))?;
    let service = ServiceKind::from_wire_name(&service_name).ok_or_else(|| {
        EnvelopeError::malformed(format!("unknown service {service_name:?}"))
    })?;

    let version = require_attr(&start, "version").map_err(|_| {
        EnvelopeError(ResultCode::with_message(
            codes::code::UNSUPPORTED_VERSION,
            "missing protocol version",
        ))
    })?;
    if version != PROTOCOL_VERSION {
        return Err(EnvelopeError(ResultCode::with_message(
            codes::code::UNSUPPORTED_VERSION,
            format!("unsupported protocol version {version:?}"),
        )));
    }

    let uf_text = optional_attr(&start, "uf")
        .map_err(EnvelopeError::malformed)?
        .ok_or_else(|| {
            EnvelopeError(ResultCode::with_message(
                codes::INVALID_UF,
                "absent federation unit",
            ))
        })?;
    let uf = Uf::parse(&uf_text).map_err(|_| {
        EnvelopeError(ResultCode::with_message(
            codes::INVALID_UF,
            format!("invalid federation unit {uf_text:?}"),
        ))
    })?;

    let cert_ref = require_attr(&start, "certRef").map_err(EnvelopeError::malformed)?;

    let span = reader
        .read_to_end(start.name())
        .map_err(EnvelopeError::malformed)?;
    let body = bytes[span.start as usize..span.end as usize].to_vec();
    match reader.read_event().map_err(EnvelopeError::malformed)? {
        Event::Eof => {}
        other => {
            return Err(EnvelopeError::malformed(format!(
                "trailing content {other:?}"
            )))
        }
    }
    if body.is_empty() {
        return Err(EnvelopeError::malformed("empty request body"));
    }

    Ok(RequestEnvelope {
        service,
        version,
        uf,
        cert_ref,
        body,
    })
}

/// A decoded response. `body` is empty when the response carried none.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedResponse {
    pub code: ResultCode,
    pub body: Vec<u8>,
}

impl DecodedResponse {
    pub fn category(&self) -> codes::Category {
        self.code.category()
    }
}

/// Encodes a response envelope. An empty body yields `<cteResponse ..></cteResponse>`.
pub fn encode_response(code: &ResultCode, body: &[u8]) -> Vec<u8> {
    let mut s = String::with_capacity(body.len() + 64);
    s.push_str("<cteResponse code=\"");
    s.push_str(&code.code.to_string());
    s.push_str("\" message=\"");
    s.push_str(&escape(code.message.as_str()));
    s.push_str("\">");
    let mut bytes = s.into_bytes();
    bytes.extend_from_slice(body);
    bytes.extend_from_slice(b"</cteResponse>");
    bytes
}

/// Total decoder: malformed input becomes an XML-formatting result with a
/// diagnostic message instead of an error.
pub fn decode_response(bytes: &[u8]) -> DecodedResponse {
    match try_decode_response(bytes) {
        Ok(r) => r,
        Err(detail) => DecodedResponse {
            code: ResultCode::with_message(
                codes::code::XML_MALFORMED,
                format!("malformed response: {detail}"),
            ),
            body: Vec::new(),
        },
    }
}

fn try_decode_response(bytes: &[u8]) -> Result<DecodedResponse, String> {
    let text = std::str::from_utf8(bytes).map_err(|_| "not UTF-8".to_string())?;
    let mut reader = Reader::from_str(text);
    let start = match reader.read_event().map_err(|e| e.to_string())? {
        Event::Start(e) if e.name().as_ref() == b"cteResponse" => e.into_owned(),
        other => return Err(format!("expected <cteResponse>, got {other:?}")),
    };
    let code_text = require_attr(&start, "code").map_err(|e| e.to_string())?;
    let code_num: u16 = code_text
        .parse()
        .map_err(|_| format!("non-numeric code {code_text:?}"))?;
    let message = require_attr(&start, "message").map_err(|e| e.to_string())?;
    let span = reader
        .read_to_end(start.name())
        .map_err(|e| e.to_string())?;
    let body = bytes[span.start as usize..span.end as usize].to_vec();
    match reader.read_event().map_err(|e| e.to_string())? {
        Event::Eof => {}
        other => return Err(format!("trailing content {other:?}")),
    }
    Ok(DecodedResponse {
        code: ResultCode::with_message(code_num, message),
        body,
    })
}

fn check_fragment(payload: &[u8]) -> Result<(), EnvelopeError> {
    if payload.is_empty() {
        return Err(EnvelopeError::malformed("empty payload"));
    }
    let text =
        std::str::from_utf8(payload).map_err(|_| EnvelopeError::malformed("payload not UTF-8"))?;
    let mut reader = Reader::from_str(text);
    let mut depth = 0usize;
    let mut roots = 0usize;
    loop {
        match reader.read_event().map_err(EnvelopeError::malformed)? {
            Event::Start(_) => {
                if depth == 0 {
                    roots += 1;
                }
                depth += 1;
            }
            Event::Empty(_) => {
                if depth == 0 {
                    roots += 1;
                }
            }
            Event::End(_) => {
                depth = depth.checked_sub(1).ok_or_else(|| {
                    EnvelopeError::malformed("unbalanced end tag in payload")
                })?;
            }
            Event::Text(t) => {
                if depth == 0 && !t.iter().all(|b| b.is_ascii_whitespace()) {
                    return Err(EnvelopeError::malformed("text outside payload root"));
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if depth != 0 {
        return Err(EnvelopeError::malformed("unclosed element in payload"));
    }
    if roots == 0 {
        return Err(EnvelopeError::malformed("payload has no element"));
    }
    Ok(())
}
