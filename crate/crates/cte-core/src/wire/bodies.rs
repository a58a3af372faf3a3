//! Typed payload bodies carried inside request/response envelopes.
//!
//! One codec per service message keeps the two sides of the wire in
//! lockstep; both the client and the authority parse with the same
//! strictness rules as document XML.

use quick_xml::escape::escape;
use quick_xml::events::Event;
use quick_xml::name::QName;
use quick_xml::{Reader, XmlVersion};

use crate::clock::Timestamp;
use crate::wire::receipt::ReceiptNumber;
use crate::xml::{optional_attr, require_attr, XmlError};

fn open<'a>(reader: &mut Reader<&'a [u8]>, name: &'static str) -> Result<Event<'a>, XmlError> {
    match reader.read_event()? {
        e @ (Event::Start(_) | Event::Empty(_)) if element_name(&e) == Some(name.as_bytes()) => {
            Ok(e)
        }
        other => Err(XmlError::Unexpected {
            expected: name,
            got: format!("{other:?}"),
        }),
    }
}

fn element_name<'a>(event: &'a Event<'a>) -> Option<&'a [u8]> {
    match event {
        Event::Start(e) => Some(e.name().into_inner()),
        Event::Empty(e) => Some(e.name().into_inner()),
        _ => None,
    }
}

fn finish(reader: &mut Reader<&[u8]>, opened: &Event<'_>, name: &'static str) -> Result<(), XmlError> {
    if matches!(opened, Event::Start(_)) {
        match reader.read_event()? {
            Event::End(e) if e.name().as_ref() == name.as_bytes() => {}
            other => {
                return Err(XmlError::Unexpected {
                    expected: name,
                    got: format!("{other:?}"),
                })
            }
        }
    }
    match reader.read_event()? {
        Event::Eof => Ok(()),
        other => Err(XmlError::Unexpected {
            expected: "end of input",
            got: format!("{other:?}"),
        }),
    }
}

fn start_of<'a>(event: &'a Event<'a>) -> &'a quick_xml::events::BytesStart<'a> {
    match event {
        Event::Start(e) => e,
        Event::Empty(e) => e,
        _ => unreachable!("open() only yields start events"),
    }
}

fn parse_u16(field: &'static str, s: &str) -> Result<u16, XmlError> {
    s.parse().map_err(|_| XmlError::value(field, s.to_string()))
}

fn parse_u32(field: &'static str, s: &str) -> Result<u32, XmlError> {
    s.parse().map_err(|_| XmlError::value(field, s.to_string()))
}

fn parse_u64(field: &'static str, s: &str) -> Result<u64, XmlError> {
    s.parse().map_err(|_| XmlError::value(field, s.to_string()))
}

fn parse_at(field: &'static str, s: &str) -> Result<Timestamp, XmlError> {
    Timestamp::parse_rfc3339(s).map_err(|e| XmlError::value(field, e.to_string()))
}

/// Receipt returned by batch submission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReceiptBody {
    pub number: ReceiptNumber,
    pub received_at: Timestamp,
    /// Federation-unit code of the receiving authority.
    pub place: String,
    /// Trailing-window average; None when the window holds no samples.
    pub avg_ms: Option<u64>,
}

impl ReceiptBody {
    pub fn encode(&self) -> Vec<u8> {
        let mut s = format!(
            "<receipt number=\"{}\" receivedAt=\"{}\" place=\"{}\"",
            escape(self.number.as_str()),
            self.received_at.to_rfc3339_millis(),
            escape(&self.place),
        );
        if let Some(avg) = self.avg_ms {
            s.push_str(&format!(" avgMs=\"{avg}\""));
        }
        s.push_str("/>");
        s.into_bytes()
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, XmlError> {
        let text = std::str::from_utf8(bytes).map_err(|_| XmlError::Utf8)?;
        let mut reader = Reader::from_str(text);
        let event = open(&mut reader, "receipt")?;
        let start = start_of(&event);
        let number = ReceiptNumber::parse(&require_attr(start, "number")?)
            .map_err(|e| XmlError::value("number", e.to_string()))?;
        let received_at = parse_at("receivedAt", &require_attr(start, "receivedAt")?)?;
        let place = require_attr(start, "place")?;
        let avg_ms = optional_attr(start, "avgMs")?
            .map(|v| parse_u64("avgMs", &v))
            .transpose()?;
        let body = ReceiptBody {
            number,
            received_at,
            place,
            avg_ms,
        };
        finish(&mut reader, &event, "receipt")?;
        Ok(body)
    }
}

/// Batch-tracking request: the receipt to look up.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackBatchRequest {
    pub receipt: String,
}

impl TrackBatchRequest {
    pub fn encode(&self) -> Vec<u8> {
        format!("<trackBatch receipt=\"{}\"/>", escape(&self.receipt)).into_bytes()
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, XmlError> {
        let text = std::str::from_utf8(bytes).map_err(|_| XmlError::Utf8)?;
        let mut reader = Reader::from_str(text);
        let event = open(&mut reader, "trackBatch")?;
        let receipt = require_attr(start_of(&event), "receipt")?;
        finish(&mut reader, &event, "trackBatch")?;
        Ok(TrackBatchRequest { receipt })
    }
}

/// Completed batch result: the asynchronous answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchResultBody {
    pub receipt: String,
    pub completed_at: Timestamp,
    pub batch_code: u16,
    pub per_document: Vec<(String, u16)>,
}

impl BatchResultBody {
    pub fn encode(&self) -> Vec<u8> {
        let mut s = format!(
            "<result receipt=\"{}\" completedAt=\"{}\" batchCode=\"{}\">",
            escape(&self.receipt),
            self.completed_at.to_rfc3339_millis(),
            self.batch_code,
        );
        for (key, code) in &self.per_document {
            s.push_str(&format!(
                "<doc key=\"{}\" code=\"{}\"/>",
                escape(key),
                code
            ));
        }
        s.push_str("</result>");
        s.into_bytes()
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, XmlError> {
        let text = std::str::from_utf8(bytes).map_err(|_| XmlError::Utf8)?;
        let mut reader = Reader::from_str(text);
        let start = match reader.read_event()? {
            Event::Start(e) if e.name().as_ref() == b"result" => e.into_owned(),
            other => {
                return Err(XmlError::Unexpected {
                    expected: "<result>",
                    got: format!("{other:?}"),
                })
            }
        };
        let receipt = require_attr(&start, "receipt")?;
        let completed_at = parse_at("completedAt", &require_attr(&start, "completedAt")?)?;
        let batch_code = parse_u16("batchCode", &require_attr(&start, "batchCode")?)?;
        let mut per_document = Vec::new();
        loop {
            match reader.read_event()? {
                Event::Empty(e) if e.name().as_ref() == b"doc" => {
                    let key = require_attr(&e, "key")?;
                    let code = parse_u16("code", &require_attr(&e, "code")?)?;
                    per_document.push((key, code));
                }
                Event::End(e) if e.name().as_ref() == b"result" => break,
                other => {
                    return Err(XmlError::Unexpected {
                        expected: "<doc/> or </result>",
                        got: format!("{other:?}"),
                    })
                }
            }
        }
        match reader.read_event()? {
            Event::Eof => {}
            other => {
                return Err(XmlError::Unexpected {
                    expected: "end of input",
                    got: format!("{other:?}"),
                })
            }
        }
        Ok(BatchResultBody {
            receipt,
            completed_at,
            batch_code,
            per_document,
        })
    }
}

/// Post-approval cancellation request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WithdrawRequest {
    pub access_key: String,
    pub reason: String,
}

impl WithdrawRequest {
    pub fn encode(&self) -> Vec<u8> {
        format!(
            "<withdraw key=\"{}\" reason=\"{}\"/>",
            escape(&self.access_key),
            escape(&self.reason)
        )
        .into_bytes()
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, XmlError> {
        let text = std::str::from_utf8(bytes).map_err(|_| XmlError::Utf8)?;
        let mut reader = Reader::from_str(text);
        let event = open(&mut reader, "withdraw")?;
        let start = start_of(&event);
        let access_key = require_attr(start, "key")?;
        let reason = require_attr(start, "reason")?;
        finish(&mut reader, &event, "withdraw")?;
        Ok(WithdrawRequest { access_key, reason })
    }
}

/// Numbering-withdrawal request: voids an unused number range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WithdrawNumberingRequest {
    pub establishment: String,
    pub series: String,
    pub from: u32,
    pub to: u32,
    pub reason: String,
}

impl WithdrawNumberingRequest {
    pub fn encode(&self) -> Vec<u8> {
        format!(
            "<withdrawNumbering establishment=\"{}\" series=\"{}\" from=\"{}\" to=\"{}\" reason=\"{}\"/>",
            escape(&self.establishment),
            escape(&self.series),
            self.from,
            self.to,
            escape(&self.reason)
        )
        .into_bytes()
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, XmlError> {
        let text = std::str::from_utf8(bytes).map_err(|_| XmlError::Utf8)?;
        let mut reader = Reader::from_str(text);
        let event = open(&mut reader, "withdrawNumbering")?;
        let start = start_of(&event);
        let parsed = WithdrawNumberingRequest {
            establishment: require_attr(start, "establishment")?,
            series: require_attr(start, "series")?,
            from: parse_u32("from", &require_attr(start, "from")?)?,
            to: parse_u32("to", &require_attr(start, "to")?)?,
            reason: require_attr(start, "reason")?,
        };
        finish(&mut reader, &event, "withdrawNumbering")?;
        Ok(parsed)
    }
}

/// Single-document status lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackCteRequest {
    pub access_key: String,
}

impl TrackCteRequest {
    pub fn encode(&self) -> Vec<u8> {
        format!("<trackCte key=\"{}\"/>", escape(&self.access_key)).into_bytes()
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, XmlError> {
        let text = std::str::from_utf8(bytes).map_err(|_| XmlError::Utf8)?;
        let mut reader = Reader::from_str(text);
        let event = open(&mut reader, "trackCte")?;
        let access_key = require_attr(start_of(&event), "key")?;
        finish(&mut reader, &event, "trackCte")?;
        Ok(TrackCteRequest { access_key })
    }
}

/// Correction request; the text travels as element content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectRequest {
    pub access_key: String,
    pub text: String,
}

impl CorrectRequest {
    pub fn encode(&self) -> Vec<u8> {
        format!(
            "<correct key=\"{}\">{}</correct>",
            escape(&self.access_key),
            escape(&self.text)
        )
        .into_bytes()
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, XmlError> {
        let text = std::str::from_utf8(bytes).map_err(|_| XmlError::Utf8)?;
        let mut reader = Reader::from_str(text);
        let (access_key, content) = match reader.read_event()? {
            Event::Start(e) if e.name().as_ref() == b"correct" => {
                let access_key = require_attr(&e, "key")?;
                let raw = reader.read_text(QName(b"correct"))?;
                let content = raw.xml_content(XmlVersion::Implicit1_0)?;
                let content = quick_xml::escape::unescape(&content)
                    .map_err(|e| XmlError::Syntax(e.to_string()))?
                    .into_owned();
                (access_key, content)
            }
            Event::Empty(e) if e.name().as_ref() == b"correct" => {
                (require_attr(&e, "key")?, String::new())
            }
            other => {
                return Err(XmlError::Unexpected {
                    expected: "<correct>",
                    got: format!("{other:?}"),
                })
            }
        };
        match reader.read_event()? {
            Event::Eof => {}
            other => {
                return Err(XmlError::Unexpected {
                    expected: "end of input",
                    got: format!("{other:?}"),
                })
            }
        }
        Ok(CorrectRequest {
            access_key,
            text: content,
        })
    }
}

/// Service-status request is an empty marker element.
pub fn encode_service_status_request() -> Vec<u8> {
    b"<serviceStatus/>".to_vec()
}

pub fn parse_service_status_request(bytes: &[u8]) -> Result<(), XmlError> {
    let text = std::str::from_utf8(bytes).map_err(|_| XmlError::Utf8)?;
    let mut reader = Reader::from_str(text);
    let event = open(&mut reader, "serviceStatus")?;
    finish(&mut reader, &event, "serviceStatus")
}

/// Service-status answer: queue depth plus the trailing-window average.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceStatusBody {
    pub depth: u64,
    pub avg_ms: Option<u64>,
}

impl ServiceStatusBody {
    pub fn encode(&self) -> Vec<u8> {
        let mut s = format!("<status depth=\"{}\"", self.depth);
        if let Some(avg) = self.avg_ms {
            s.push_str(&format!(" avgMs=\"{avg}\""));
        }
        s.push_str("/>");
        s.into_bytes()
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, XmlError> {
        let text = std::str::from_utf8(bytes).map_err(|_| XmlError::Utf8)?;
        let mut reader = Reader::from_str(text);
        let event = open(&mut reader, "status")?;
        let start = start_of(&event);
        let depth = parse_u64("depth", &require_attr(start, "depth")?)?;
        let avg_ms = optional_attr(start, "avgMs")?
            .map(|v| parse_u64("avgMs", &v))
            .transpose()?;
        finish(&mut reader, &event, "status")?;
        Ok(ServiceStatusBody { depth, avg_ms })
    }
}
