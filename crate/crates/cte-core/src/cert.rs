//! Certificates and document signatures.
//!
//! Not real PKI: a certificate is a subject CNPJ, a validity window, a
//! revocation flag, and a shared secret; a signature is a SHA-256 keyed
//! digest over the document's canonical bytes (without the signature
//! element). This is enough to exercise every certificate error branch and
//! tamper detection without X.509 infrastructure.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clock::Timestamp;
use crate::cnpj::Cnpj;
use crate::document::CTeDocument;
use crate::xml;

/// Domain separation for the keyed digest.
const SIGNATURE_CONTEXT: &[u8] = b"cte-signature-v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub subject_cnpj: Cnpj,
    pub not_before: Timestamp,
    pub not_after: Timestamp,
    pub revoked: bool,
    pub key_id: Vec<u8>,
    pub secret: Vec<u8>,
}

impl Certificate {
    pub fn new(
        subject_cnpj: Cnpj,
        not_before: Timestamp,
        not_after: Timestamp,
        key_id: Vec<u8>,
        secret: Vec<u8>,
    ) -> Result<Self, CertificateError> {
        if not_before >= not_after {
            return Err(CertificateError::EmptyWindow {
                not_before,
                not_after,
            });
        }
        Ok(Certificate {
            subject_cnpj,
            not_before,
            not_after,
            revoked: false,
            key_id,
            secret,
        })
    }

    pub fn key_id_hex(&self) -> String {
        hex::encode(&self.key_id)
    }

    /// True iff `now` lies inside the validity window (inclusive bounds).
    pub fn in_window(&self, now: Timestamp) -> bool {
        self.not_before <= now && now <= self.not_after
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CertificateError {
    #[error("certificate window is empty: not_before {not_before:?} >= not_after {not_after:?}")]
    EmptyWindow {
        not_before: Timestamp,
        not_after: Timestamp,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub key_id: Vec<u8>,
    pub digest: Vec<u8>,
}

impl Signature {
    /// The mechanical digest: no precondition checks. The dispatch pipeline
    /// uses this so that upstream data errors (a mistyped establishment
    /// CNPJ) travel to the authority, which owns their rejection.
    pub fn compute(doc: &CTeDocument, cert: &Certificate) -> Signature {
        let canonical = xml::serialize_document_unsigned(doc);
        let mut hasher = Sha256::new();
        hasher.update(SIGNATURE_CONTEXT);
        hasher.update((cert.secret.len() as u64).to_le_bytes());
        hasher.update(&cert.secret);
        hasher.update(&canonical);
        Signature {
            key_id: cert.key_id.clone(),
            digest: hasher.finalize().to_vec(),
        }
    }

    pub fn key_id_hex(&self) -> String {
        hex::encode(&self.key_id)
    }

    pub fn digest_hex(&self) -> String {
        hex::encode(&self.digest)
    }
}

/// Signs after enforcing the full certificate contract.
pub fn sign(
    doc: &CTeDocument,
    cert: &Certificate,
    now: Timestamp,
) -> Result<Signature, SignError> {
    if cert.revoked {
        return Err(SignError::Revoked);
    }
    if now < cert.not_before {
        return Err(SignError::NotYetValid);
    }
    if now > cert.not_after {
        return Err(SignError::Overdue);
    }
    if cert.subject_cnpj.as_str() != doc.establishment.as_str() {
        return Err(SignError::CnpjMismatch {
            certificate: cert.subject_cnpj.clone(),
            document: doc.establishment.clone(),
        });
    }
    Ok(Signature::compute(doc, cert))
}

/// True iff `signature` was produced over `doc`'s current canonical bytes
/// with `cert`'s secret.
pub fn verify(doc: &CTeDocument, signature: &Signature, cert: &Certificate) -> bool {
    signature.key_id == cert.key_id && *signature == Signature::compute(doc, cert)
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SignError {
    #[error("certificate is revoked")]
    Revoked,
    #[error("certificate is not yet valid")]
    NotYetValid,
    #[error("certificate is overdue")]
    Overdue,
    #[error("certificate subject {certificate} does not match document establishment {document}")]
    CnpjMismatch {
        certificate: Cnpj,
        document: Cnpj,
    },
}
