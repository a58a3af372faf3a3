//! Batch packing for transmission.
//!
//! Documents are partitioned by establishment (stable, order of first
//! appearance), then packed greedy first-fit in input order. Every batch
//! holds 1..=50 documents from a single establishment and serializes,
//! wrapper included, to at most 512,000 bytes (500 KB at 1 KB = 1,024 B).
//! A document too large even alone is reported, never silently dropped.

use quick_xml::events::Event;
use quick_xml::Reader;

use crate::cnpj::Cnpj;
use crate::document::CTeDocument;
use crate::lifecycle::LifecycleStatus;
use crate::wire::codes::ResultCode;
use crate::wire::receipt::ReceiptNumber;
use crate::xml::{self, XmlError};

pub const MAX_DOCS: usize = 50;
pub const MAX_BYTES: usize = 512_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub batch_id: u64,
    pub establishment: Cnpj,
    pub documents: Vec<CTeDocument>,
    /// Exact byte length of `serialize_batch` output.
    pub serialized_size: usize,
    pub receipt: Option<ReceiptNumber>,
    pub result_code: Option<ResultCode>,
}

/// A document that cannot fit even in a batch of its own.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OversizedDocument {
    /// Still in Draft; the caller decides how to report it.
    pub document: CTeDocument,
    /// Size of the hypothetical batch of one.
    pub batch_of_one_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackOutcome {
    pub batches: Vec<Batch>,
    pub oversized: Vec<OversizedDocument>,
}

#[derive(Debug, thiserror::Error)]
pub enum PackError {
    #[error("document {key} is {status}, not Draft")]
    NotDraft {
        key: String,
        status: LifecycleStatus,
    },
    #[error("document {key} carries no signature")]
    Unsigned { key: String },
}

/// Packs draft documents into batches. `first_batch_id` seeds the local
/// counter; batches receive consecutive ids in creation order. Packed
/// documents come back in status Batched; oversized ones stay Draft.
pub fn pack(docs: Vec<CTeDocument>, first_batch_id: u64) -> Result<PackOutcome, PackError> {
    for doc in &docs {
        if doc.status != LifecycleStatus::Draft {
            return Err(PackError::NotDraft {
                key: doc.access_key.as_str().to_string(),
                status: doc.status,
            });
        }
        if doc.signature.is_none() {
            return Err(PackError::Unsigned {
                key: doc.access_key.as_str().to_string(),
            });
        }
    }

    // Stable partition by establishment, order of first appearance.
    let mut groups: Vec<(String, Vec<CTeDocument>)> = Vec::new();
    for doc in docs {
        let est = doc.establishment.as_str().to_string();
        match groups.iter_mut().find(|(e, _)| *e == est) {
            Some((_, members)) => members.push(doc),
            None => groups.push((est, vec![doc])),
        }
    }

    let mut batches = Vec::new();
    let mut oversized = Vec::new();
    let mut next_id = first_batch_id;

    for (est, members) in groups {
        let mut current: Vec<(CTeDocument, usize)> = Vec::new();
        let mut doc_bytes_sum = 0usize;

        let close = |current: &mut Vec<(CTeDocument, usize)>,
                     doc_bytes_sum: &mut usize,
                     next_id: &mut u64,
                     batches: &mut Vec<Batch>| {
            if current.is_empty() {
                return;
            }
            let count = current.len();
            let size = wrapper_overhead(*next_id, &est, count) + *doc_bytes_sum;
            let documents = current
                .drain(..)
                .map(|(mut d, _)| {
                    d.status = LifecycleStatus::Batched;
                    d
                })
                .collect();
            batches.push(Batch {
                batch_id: *next_id,
                establishment: Cnpj::parse_digits(&est).expect("establishment shape"),
                documents,
                serialized_size: size,
                receipt: None,
                result_code: None,
            });
            *next_id += 1;
            *doc_bytes_sum = 0;
        };

        for doc in members {
            let doc_len = xml::serialize_document(&doc).len();
            let tentative_count = current.len() + 1;
            let tentative =
                wrapper_overhead(next_id, &est, tentative_count) + doc_bytes_sum + doc_len;
            if tentative_count <= MAX_DOCS && tentative <= MAX_BYTES {
                doc_bytes_sum += doc_len;
                current.push((doc, doc_len));
                continue;
            }
            close(&mut current, &mut doc_bytes_sum, &mut next_id, &mut batches);
            // Checked against the id this batch would actually get: closing
            // may have grown next_id by a digit.
            let alone = wrapper_overhead(next_id, &est, 1) + doc_len;
            if alone > MAX_BYTES {
                oversized.push(OversizedDocument {
                    document: doc,
                    batch_of_one_size: alone,
                });
                continue;
            }
            doc_bytes_sum += doc_len;
            current.push((doc, doc_len));
        }
        close(&mut current, &mut doc_bytes_sum, &mut next_id, &mut batches);
    }

    Ok(PackOutcome { batches, oversized })
}

/// Serializes a batch to its canonical XML. Output length equals
/// `batch.serialized_size` for batches produced by `pack`.
pub fn serialize_batch(batch: &Batch) -> Vec<u8> {
    let mut out = wrapper_prefix(
        batch.batch_id,
        batch.establishment.as_str(),
        batch.documents.len(),
    )
    .into_bytes();
    for doc in &batch.documents {
        out.extend_from_slice(&xml::serialize_document(doc));
    }
    out.extend_from_slice(b"</cteBatch>");
    out
}

/// A batch as decoded on the receiving side. The establishment attribute is
/// kept raw; validating it is the receiver's concern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedBatch {
    pub batch_id: u64,
    pub establishment: String,
    pub count: usize,
    pub documents: Vec<CTeDocument>,
}

/// Parses batch XML. Enforces shape only: the count attribute must match the
/// number of `<cte>` children and be at least 1.
pub fn parse_batch(bytes: &[u8]) -> Result<ParsedBatch, XmlError> {
    let text = std::str::from_utf8(bytes).map_err(|_| XmlError::Utf8)?;
    let mut reader = Reader::from_str(text);
    let start = match reader.read_event()? {
        Event::Start(e) if e.name().as_ref() == b"cteBatch" => e.into_owned(),
        other => return Err(xml::unexpected("<cteBatch>", &other)),
    };
    let batch_id: u64 = xml::require_attr(&start, "batchId")?
        .parse()
        .map_err(|_| XmlError::value("batchId", "not an integer"))?;
    let establishment = xml::require_attr(&start, "establishment")?;
    let count: usize = xml::require_attr(&start, "count")?
        .parse()
        .map_err(|_| XmlError::value("count", "not an integer"))?;

    let mut documents = Vec::new();
    loop {
        match reader.read_event()? {
            Event::Start(e) if e.name().as_ref() == b"cte" => {
                documents.push(xml::read_document_body(&mut reader)?);
            }
            Event::End(e) if e.name().as_ref() == b"cteBatch" => break,
            Event::Text(t) if t.iter().all(|b| b.is_ascii_whitespace()) => {}
            other => return Err(xml::unexpected("<cte> or </cteBatch>", &other)),
        }
    }
    match reader.read_event()? {
        Event::Eof => {}
        other => return Err(xml::unexpected("end of input", &other)),
    }

    if documents.is_empty() {
        return Err(XmlError::value("cteBatch", "batch holds no documents"));
    }
    if count != documents.len() {
        return Err(XmlError::value(
            "count",
            format!("attribute says {count}, found {}", documents.len()),
        ));
    }

    Ok(ParsedBatch {
        batch_id,
        establishment,
        count,
        documents,
    })
}

fn wrapper_prefix(batch_id: u64, establishment: &str, count: usize) -> String {
    format!("<cteBatch batchId=\"{batch_id}\" establishment=\"{establishment}\" count=\"{count}\">")
}

fn wrapper_overhead(batch_id: u64, establishment: &str, count: usize) -> usize {
    wrapper_prefix(batch_id, establishment, count).len() + "</cteBatch>".len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cert::{sign, Certificate};
    use crate::clock::Timestamp;
    use crate::document::Modal;
    use crate::uf::Uf;

    fn cert(cnpj: &str) -> Certificate {
        Certificate::new(
            Cnpj::parse(cnpj).unwrap(),
            Timestamp::from_ms(0),
            Timestamp::from_ms(4_102_444_800_000),
            b"key-1".to_vec(),
            b"secret".to_vec(),
        )
        .unwrap()
    }

    fn doc(cnpj: &str, number: u32, description: &str) -> CTeDocument {
        let mut d = CTeDocument::new(
            Cnpj::parse(cnpj).unwrap(),
            "001",
            &format!("{number:09}"),
            Timestamp::from_ms(1_755_600_000_000),
            Modal::Highway,
            Uf::new(35).unwrap(),
            Uf::new(43).unwrap(),
            123_456,
            description,
            &format!("{number:08}"),
        )
        .unwrap();
        let now = Timestamp::from_ms(1_755_600_000_000);
        d.signature = Some(sign(&d, &cert(cnpj), now).unwrap());
        d
    }

    const EST: &str = "11222333000181";

    #[test]
    fn empty_input_empty_output() {
        let out = pack(Vec::new(), 1).unwrap();
        assert!(out.batches.is_empty());
        assert!(out.oversized.is_empty());
    }

    #[test]
    fn fifty_small_docs_one_batch() {
        let docs: Vec<_> = (1..=50).map(|n| doc(EST, n, "cargo")).collect();
        let out = pack(docs, 7).unwrap();
        assert_eq!(out.batches.len(), 1);
        let b = &out.batches[0];
        assert_eq!(b.batch_id, 7);
        assert_eq!(b.documents.len(), 50);
        assert!(b
            .documents
            .iter()
            .all(|d| d.status == LifecycleStatus::Batched));
        assert_eq!(serialize_batch(b).len(), b.serialized_size);
    }

    #[test]
    fn count_overflow_splits_50_50_20() {
        let docs: Vec<_> = (1..=120).map(|n| doc(EST, n, "cargo")).collect();
        let out = pack(docs, 1).unwrap();
        let sizes: Vec<_> = out.batches.iter().map(|b| b.documents.len()).collect();
        assert_eq!(sizes, vec![50, 50, 20]);
        assert_eq!(
            out.batches.iter().map(|b| b.batch_id).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
        // Order preserved across the establishment's batches.
        let numbers: Vec<_> = out
            .batches
            .iter()
            .flat_map(|b| b.documents.iter().map(|d| d.number.clone()))
            .collect();
        let expected: Vec<_> = (1..=120u32).map(|n| format!("{n:09}")).collect();
        assert_eq!(numbers, expected);
    }

    #[test]
    fn size_overflow_packs_two_per_batch() {
        // ~200 KB each: two fit under 512,000 bytes, a third does not.
        let big = "x".repeat(204_800 - 493);
        let docs: Vec<_> = (1..=5).map(|n| doc(EST, n, &big)).collect();
        let out = pack(docs, 1).unwrap();
        let counts: Vec<_> = out.batches.iter().map(|b| b.documents.len()).collect();
        assert_eq!(counts, vec![2, 2, 1]);
        for b in &out.batches {
            assert!(b.serialized_size <= MAX_BYTES);
            assert_eq!(serialize_batch(b).len(), b.serialized_size);
        }
    }

    #[test]
    fn exact_fit_boundary() {
        // Signed doc is 493 bytes + description; wrapper for one doc with a
        // one-digit batch id is 74. 511,433 lands exactly on 512,000.
        let d = doc(EST, 1, &"y".repeat(511_433));
        let out = pack(vec![d], 1).unwrap();
        assert_eq!(out.batches.len(), 1);
        assert_eq!(out.batches[0].serialized_size, MAX_BYTES);
        assert_eq!(serialize_batch(&out.batches[0]).len(), MAX_BYTES);

        let d = doc(EST, 1, &"y".repeat(511_434));
        let out = pack(vec![d], 1).unwrap();
        assert!(out.batches.is_empty());
        assert_eq!(out.oversized.len(), 1);
        assert_eq!(out.oversized[0].batch_of_one_size, MAX_BYTES + 1);
        assert_eq!(
            out.oversized[0].document.status,
            LifecycleStatus::Draft
        );
    }

    #[test]
    fn establishments_never_mix() {
        let a = "11222333000181";
        let b = "04550497000172";
        let mut docs = Vec::new();
        for n in 1..=10 {
            docs.push(doc(if n % 2 == 0 { a } else { b }, n, "cargo"));
        }
        let out = pack(docs, 1).unwrap();
        assert_eq!(out.batches.len(), 2);
        for batch in &out.batches {
            assert!(batch
                .documents
                .iter()
                .all(|d| d.establishment == batch.establishment));
        }
        // Stable: b appears first in the input.
        assert_eq!(out.batches[0].establishment.as_str(), b);
    }

    #[test]
    fn non_draft_input_refused() {
        let mut d = doc(EST, 1, "cargo");
        d.status = LifecycleStatus::Approved;
        assert!(matches!(
            pack(vec![d], 1),
            Err(PackError::NotDraft { .. })
        ));
    }

    #[test]
    fn unsigned_input_refused() {
        let mut d = doc(EST, 1, "cargo");
        d.signature = None;
        assert!(matches!(pack(vec![d], 1), Err(PackError::Unsigned { .. })));
    }

    #[test]
    fn batch_round_trip() {
        let docs: Vec<_> = (1..=3).map(|n| doc(EST, n, "round trip")).collect();
        let out = pack(docs, 42).unwrap();
        let bytes = serialize_batch(&out.batches[0]);
        let parsed = parse_batch(&bytes).unwrap();
        assert_eq!(parsed.batch_id, 42);
        assert_eq!(parsed.establishment, EST);
        assert_eq!(parsed.count, 3);
        assert_eq!(parsed.documents.len(), 3);
        for (p, d) in parsed.documents.iter().zip(&out.batches[0].documents) {
            assert_eq!(p.access_key, d.access_key);
            assert_eq!(p.signature, d.signature);
        }
    }

    #[test]
    fn count_mismatch_rejected() {
        let docs: Vec<_> = (1..=2).map(|n| doc(EST, n, "c")).collect();
        let out = pack(docs, 1).unwrap();
        let bytes = String::from_utf8(serialize_batch(&out.batches[0])).unwrap();
        let forged = bytes.replace("count=\"2\"", "count=\"3\"");
        assert!(parse_batch(forged.as_bytes()).is_err());
        let empty = b"<cteBatch batchId=\"1\" establishment=\"11222333000181\" count=\"0\"></cteBatch>";
        assert!(parse_batch(empty).is_err());
    }
}
