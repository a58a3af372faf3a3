//! Canonical XML form for documents.
//!
//! The canonical form is deterministic byte-for-byte: no XML declaration (so
//! fragments compose into batches and envelopes), no insignificant
//! whitespace, fixed child order, full entity escaping of text content.
//! Parsing is strict: input that deviates from the canonical shape is a
//! formatting error, which the authority maps to its XML-formatting code.

use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event};
use quick_xml::name::QName;
use quick_xml::{Reader, XmlVersion};

use crate::access_key::AccessKey;
use crate::clock::Timestamp;
use crate::cnpj::Cnpj;
use crate::document::{CTeDocument, Modal};
use crate::lifecycle::LifecycleStatus;
use crate::uf::Uf;

/// Serializes with the signature element when present.
pub fn serialize_document(doc: &CTeDocument) -> Vec<u8> {
    canonical(doc, doc.signature.is_some())
}

/// Serializes without the signature element; this is the digest input.
pub fn serialize_document_unsigned(doc: &CTeDocument) -> Vec<u8> {
    canonical(doc, false)
}

fn canonical(doc: &CTeDocument, with_signature: bool) -> Vec<u8> {
    let mut s = String::with_capacity(512);
    s.push_str("<cte>");
    text_element(&mut s, "accessKey", doc.access_key.as_str());
    text_element(&mut s, "establishment", doc.establishment.as_str());
    text_element(&mut s, "series", &doc.series);
    text_element(&mut s, "number", &doc.number);
    text_element(&mut s, "issueInstant", &doc.issue_instant.to_rfc3339());
    text_element(&mut s, "modal", doc.modal.as_str());
    text_element(&mut s, "originUF", &doc.origin_uf.as_str());
    text_element(&mut s, "destUF", &doc.dest_uf.as_str());
    text_element(
        &mut s,
        "freightValueCents",
        &doc.freight_value_cents.to_string(),
    );
    text_element(&mut s, "cargoDescription", &doc.cargo_description);
    if with_signature {
        let sig = doc.signature.as_ref().expect("caller checked");
        s.push_str("<signature>");
        text_element(&mut s, "keyId", &sig.key_id_hex());
        text_element(&mut s, "digest", &sig.digest_hex());
        s.push_str("</signature>");
    }
    s.push_str("</cte>");
    s.into_bytes()
}

/// Writes `<name>escaped value</name>`.
pub(crate) fn text_element(out: &mut String, name: &str, value: &str) {
    out.push('<');
    out.push_str(name);
    out.push('>');
    out.push_str(&escape(value));
    out.push_str("</");
    out.push_str(name);
    out.push('>');
}

/// Parses one canonical document.
pub fn parse_document(bytes: &[u8]) -> Result<CTeDocument, XmlError> {
    let text = std::str::from_utf8(bytes).map_err(|_| XmlError::Utf8)?;
    let mut reader = Reader::from_str(text);
    let doc = match reader.read_event()? {
        Event::Start(e) if e.name().as_ref() == b"cte" => read_document_body(&mut reader)?,
        other => return Err(unexpected("<cte>", &other)),
    };
    match reader.read_event()? {
        Event::Eof => Ok(doc),
        other => Err(unexpected("end of input", &other)),
    }
}

/// Reads document children through `</cte>`; the `<cte>` start tag must
/// already be consumed. Used directly by batch parsing.
pub(crate) fn read_document_body(reader: &mut Reader<&[u8]>) -> Result<CTeDocument, XmlError> {
    let access_key_text = read_child_text(reader, "accessKey")?;
    let access_key = AccessKey::parse(&access_key_text)
        .map_err(|e| XmlError::value("accessKey", e.to_string()))?;
    let establishment = Cnpj::parse_digits(&read_child_text(reader, "establishment")?)
        .map_err(|e| XmlError::value("establishment", e.to_string()))?;
    let series = read_child_text(reader, "series")?;
    require_digits("series", &series, 3)?;
    let number = read_child_text(reader, "number")?;
    require_digits("number", &number, 9)?;
    let issue_instant = Timestamp::parse_rfc3339(&read_child_text(reader, "issueInstant")?)
        .map_err(|e| XmlError::value("issueInstant", e.to_string()))?;
    let modal = Modal::parse(&read_child_text(reader, "modal")?)
        .map_err(|e| XmlError::value("modal", e.to_string()))?;
    let origin_uf = Uf::parse(&read_child_text(reader, "originUF")?)
        .map_err(|e| XmlError::value("originUF", e.to_string()))?;
    let dest_uf = Uf::parse(&read_child_text(reader, "destUF")?)
        .map_err(|e| XmlError::value("destUF", e.to_string()))?;
    let freight_text = read_child_text(reader, "freightValueCents")?;
    let freight_value_cents: u64 = freight_text
        .parse()
        .map_err(|_| XmlError::value("freightValueCents", freight_text.clone()))?;
    let cargo_description = read_child_text(reader, "cargoDescription")?;
    crate::document::validate_text("cargoDescription", &cargo_description)
        .map_err(|e| XmlError::value("cargoDescription", e.to_string()))?;

    let signature = match reader.read_event()? {
        Event::Start(e) if e.name().as_ref() == b"signature" => {
            let key_id = decode_hex("keyId", &read_child_text(reader, "keyId")?)?;
            let digest = decode_hex("digest", &read_child_text(reader, "digest")?)?;
            expect_end(reader, "signature")?;
            expect_end(reader, "cte")?;
            Some(crate::cert::Signature { key_id, digest })
        }
        Event::End(e) if e.name().as_ref() == b"cte" => None,
        other => return Err(unexpected("<signature> or </cte>", &other)),
    };

    Ok(CTeDocument {
        access_key,
        establishment,
        series,
        number,
        issue_instant,
        modal,
        origin_uf,
        dest_uf,
        freight_value_cents,
        cargo_description,
        signature,
        status: LifecycleStatus::Draft,
        correction_notes: Vec::new(),
    })
}

/// Reads `<name>text</name>` where the next event must be the start tag.
pub(crate) fn read_child_text(
    reader: &mut Reader<&[u8]>,
    name: &'static str,
) -> Result<String, XmlError> {
    match reader.read_event()? {
        Event::Start(e) if e.name().as_ref() == name.as_bytes() => {
            let text = reader.read_text(QName(name.as_bytes()))?;
            let content = text.xml_content(XmlVersion::Implicit1_0)?;
            Ok(quick_xml::escape::unescape(&content)
                .map_err(|e| XmlError::Syntax(e.to_string()))?
                .into_owned())
        }
        other => Err(unexpected(name, &other)),
    }
}

pub(crate) fn expect_end(reader: &mut Reader<&[u8]>, name: &'static str) -> Result<(), XmlError> {
    match reader.read_event()? {
        Event::End(e) if e.name().as_ref() == name.as_bytes() => Ok(()),
        other => Err(unexpected(name, &other)),
    }
}

/// Fetches a required attribute, unescaped.
pub(crate) fn require_attr(start: &BytesStart<'_>, name: &'static str) -> Result<String, XmlError> {
    let attr = start
        .try_get_attribute(name)
        .map_err(|e| XmlError::Syntax(e.to_string()))?
        .ok_or(XmlError::MissingAttribute(name))?;
    Ok(attr
        .normalized_value(XmlVersion::Implicit1_0)
        .map_err(|e| XmlError::Syntax(e.to_string()))?
        .into_owned())
}

/// Fetches an optional attribute, unescaped.
pub(crate) fn optional_attr(
    start: &BytesStart<'_>,
    name: &'static str,
) -> Result<Option<String>, XmlError> {
    match start
        .try_get_attribute(name)
        .map_err(|e| XmlError::Syntax(e.to_string()))?
    {
        Some(attr) => Ok(Some(
            attr.normalized_value(XmlVersion::Implicit1_0)
                .map_err(|e| XmlError::Syntax(e.to_string()))?
                .into_owned(),
        )),
        None => Ok(None),
    }
}

fn decode_hex(field: &'static str, s: &str) -> Result<Vec<u8>, XmlError> {
    hex::decode(s).map_err(|e| XmlError::value(field, e.to_string()))
}

fn require_digits(field: &'static str, s: &str, width: usize) -> Result<(), XmlError> {
    if s.len() == width && s.bytes().all(|b| b.is_ascii_digit()) {
        Ok(())
    } else {
        Err(XmlError::value(field, format!("expected {width} digits")))
    }
}

pub(crate) fn unexpected(expected: &'static str, got: &Event<'_>) -> XmlError {
    XmlError::Unexpected {
        expected,
        got: format!("{got:?}"),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum XmlError {
    #[error("input is not valid UTF-8")]
    Utf8,
    #[error("XML syntax error: {0}")]
    Syntax(String),
    #[error("expected {expected}, got {got}")]
    Unexpected { expected: &'static str, got: String },
    #[error("missing attribute {0}")]
    MissingAttribute(&'static str),
    #[error("invalid {field}: {message}")]
    Value {
        field: &'static str,
        message: String,
    },
}

impl XmlError {
    pub(crate) fn value(field: &'static str, message: impl Into<String>) -> Self {
        XmlError::Value {
            field,
            message: message.into(),
        }
    }
}

impl From<quick_xml::Error> for XmlError {
    fn from(e: quick_xml::Error) -> Self {
        XmlError::Syntax(e.to_string())
    }
}

impl From<quick_xml::encoding::EncodingError> for XmlError {
    fn from(e: quick_xml::encoding::EncodingError) -> Self {
        XmlError::Syntax(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cert::{Certificate, Signature};

    fn fixture(description: &str) -> CTeDocument {
        CTeDocument::new(
            Cnpj::parse("11222333000181").unwrap(),
            "001",
            "000000001",
            Timestamp::parse_rfc3339("2026-08-19T12:00:00Z").unwrap(),
            Modal::Highway,
            Uf::new(35).unwrap(),
            Uf::new(33).unwrap(),
            150_000,
            description,
            "00000000",
        )
        .unwrap()
    }

    #[test]
    fn deterministic_bytes() {
        let doc = fixture("general cargo");
        assert_eq!(serialize_document(&doc), serialize_document(&doc));
    }

    #[test]
    fn round_trip_unsigned() {
        let doc = fixture("general cargo");
        let parsed = parse_document(&serialize_document(&doc)).unwrap();
        assert_eq!(parsed, doc);
    }

    #[test]
    fn round_trip_signed() {
        let mut doc = fixture("cargo & <specials> \"quoted\"");
        let cert = Certificate::new(
            Cnpj::parse("11222333000181").unwrap(),
            Timestamp::from_ms(0),
            Timestamp::from_ms(u32::MAX as u64 * 1000),
            b"key-1".to_vec(),
            b"secret".to_vec(),
        )
        .unwrap();
        doc.signature = Some(Signature::compute(&doc, &cert));
        let parsed = parse_document(&serialize_document(&doc)).unwrap();
        assert_eq!(parsed, doc);
    }

    #[test]
    fn unsigned_form_drops_signature_only() {
        let mut doc = fixture("general cargo");
        let unsigned_before = serialize_document_unsigned(&doc);
        doc.signature = Some(Signature {
            key_id: vec![1],
            digest: vec![2],
        });
        assert_eq!(serialize_document_unsigned(&doc), unsigned_before);
        assert_ne!(serialize_document(&doc), unsigned_before);
    }

    #[test]
    fn canonical_size_pinned() {
        // Regression pin, measured once: tag overhead is 2*len(name)+5 per
        // text element, 11 bytes for the <cte> wrapper; with a 100-byte
        // all-ASCII description, a 6-digit freight value, modal "highway"
        // the unsigned form is 464 bytes.
        let doc = fixture(&"d".repeat(100));
        assert_eq!(serialize_document(&doc).len(), 464);
    }

    #[test]
    fn truncated_input_is_an_error() {
        let doc = fixture("general cargo");
        let bytes = serialize_document(&doc);
        assert!(parse_document(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn wrong_element_order_is_an_error() {
        let xml = b"<cte><establishment>11222333000181</establishment></cte>";
        assert!(parse_document(xml).is_err());
    }

    #[test]
    fn non_utf8_is_an_error() {
        assert!(matches!(parse_document(&[0xff, 0xfe]), Err(XmlError::Utf8)));
    }

    #[test]
    fn escaping_round_trips_specials() {
        let doc = fixture("a&b<c>d\"e'f ünïcödé");
        let parsed = parse_document(&serialize_document(&doc)).unwrap();
        assert_eq!(parsed.cargo_description, doc.cargo_description);
    }
}
