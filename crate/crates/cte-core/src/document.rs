//! The CT-e document record.

use serde::{Deserialize, Serialize};

use crate::access_key::{AccessKey, AccessKeyError};
use crate::cert::Signature;
use crate::clock::Timestamp;
use crate::cnpj::Cnpj;
use crate::lifecycle::LifecycleStatus;
use crate::uf::Uf;

/// The five transport modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modal {
    Highway,
    Aerial,
    Pipeline,
    Waterway,
    Rail,
}

impl Modal {
    pub const ALL: [Modal; 5] = [
        Modal::Highway,
        Modal::Aerial,
        Modal::Pipeline,
        Modal::Waterway,
        Modal::Rail,
    ];

    pub const fn as_str(self) -> &'static str {
        match self {
            Modal::Highway => "highway",
            Modal::Aerial => "aerial",
            Modal::Pipeline => "pipeline",
            Modal::Waterway => "waterway",
            Modal::Rail => "rail",
        }
    }

    pub fn parse(s: &str) -> Result<Self, DocumentError> {
        Modal::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| DocumentError::UnknownModal(s.to_string()))
    }
}

impl std::fmt::Display for Modal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One electronic transportation-knowledge record.
///
/// `establishment` may carry unverified check digits (see [`Cnpj`]); the
/// access key is always consistent with the other identifier fields by
/// construction. Status changes go through the lifecycle state machine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CTeDocument {
    pub access_key: AccessKey,
    pub establishment: Cnpj,
    pub series: String,
    pub number: String,
    pub issue_instant: Timestamp,
    pub modal: Modal,
    pub origin_uf: Uf,
    pub dest_uf: Uf,
    pub freight_value_cents: u64,
    pub cargo_description: String,
    pub signature: Option<Signature>,
    pub status: LifecycleStatus,
    pub correction_notes: Vec<String>,
}

impl CTeDocument {
    /// Builds a draft document; the access key is computed from the fields
    /// (key UF = origin UF, emission type 1) and `random`, an 8-digit string.
    /// The issue instant is truncated to whole seconds so canonical bytes
    /// round-trip.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        establishment: Cnpj,
        series: &str,
        number: &str,
        issue_instant: Timestamp,
        modal: Modal,
        origin_uf: Uf,
        dest_uf: Uf,
        freight_value_cents: u64,
        cargo_description: &str,
        random: &str,
    ) -> Result<Self, DocumentError> {
        validate_text("cargo_description", cargo_description)?;
        let issue_instant = issue_instant.truncate_to_seconds();
        let access_key = AccessKey::compute(
            origin_uf,
            issue_instant,
            &establishment,
            series,
            number,
            1,
            random,
        )?;
        Ok(CTeDocument {
            access_key,
            establishment,
            series: series.to_string(),
            number: number.to_string(),
            issue_instant,
            modal,
            origin_uf,
            dest_uf,
            freight_value_cents,
            cargo_description: cargo_description.to_string(),
            signature: None,
            status: LifecycleStatus::Draft,
            correction_notes: Vec::new(),
        })
    }

    /// True iff the embedded access key agrees with the identifier fields.
    pub fn key_consistent(&self) -> bool {
        self.access_key.consistent_with(
            &self.establishment,
            &self.series,
            &self.number,
            self.issue_instant,
        ) && self.access_key.uf() == self.origin_uf
    }
}

/// Rejects C0 control characters: XML 1.0 cannot carry most of them and the
/// TXT interchange format is line-oriented.
pub fn validate_text(field: &'static str, s: &str) -> Result<(), DocumentError> {
    if let Some(c) = s.chars().find(|c| (*c as u32) < 0x20) {
        return Err(DocumentError::ControlChar {
            field,
            codepoint: c as u32,
        });
    }
    Ok(())
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DocumentError {
    #[error("unknown modal {0:?}")]
    UnknownModal(String),
    #[error("{field} contains control character U+{codepoint:04X}")]
    ControlChar { field: &'static str, codepoint: u32 },
    #[error(transparent)]
    AccessKey(#[from] AccessKeyError),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> CTeDocument {
        CTeDocument::new(
            Cnpj::parse("11222333000181").unwrap(),
            "001",
            "000000001",
            Timestamp::parse_rfc3339("2026-08-19T12:00:00Z").unwrap(),
            Modal::Highway,
            Uf::new(35).unwrap(),
            Uf::new(33).unwrap(),
            150_000,
            "general cargo",
            "00000000",
        )
        .unwrap()
    }

    #[test]
    fn starts_as_unsigned_draft() {
        let doc = fixture();
        assert_eq!(doc.status, LifecycleStatus::Draft);
        assert!(doc.signature.is_none());
        assert!(doc.correction_notes.is_empty());
    }

    #[test]
    fn key_is_consistent_by_construction() {
        let doc = fixture();
        assert!(doc.key_consistent());
        assert_eq!(
            doc.access_key.as_str(),
            "35260811222333000181570010000000011000000006"
        );
    }

    #[test]
    fn instant_truncated_to_seconds() {
        let doc = CTeDocument::new(
            Cnpj::parse("11222333000181").unwrap(),
            "001",
            "000000002",
            Timestamp::from_ms(1_755_607_200_999),
            Modal::Rail,
            Uf::new(35).unwrap(),
            Uf::new(35).unwrap(),
            1,
            "x",
            "00000001",
        )
        .unwrap();
        assert_eq!(doc.issue_instant.as_ms() % 1_000, 0);
    }

    #[test]
    fn modal_strings_round_trip() {
        for m in Modal::ALL {
            assert_eq!(Modal::parse(m.as_str()).unwrap(), m);
        }
        assert!(Modal::parse("road").is_err());
    }

    #[test]
    fn control_characters_rejected() {
        let err = CTeDocument::new(
            Cnpj::parse("11222333000181").unwrap(),
            "001",
            "000000003",
            Timestamp::from_ms(0),
            Modal::Highway,
            Uf::new(35).unwrap(),
            Uf::new(35).unwrap(),
            1,
            "line\nbreak",
            "00000002",
        )
        .unwrap_err();
        assert!(matches!(err, DocumentError::ControlChar { .. }));
    }

    #[test]
    fn mistyped_establishment_still_constructs() {
        // Shape-valid but check-digit-invalid CNPJs must flow through: the
        // authority owns their rejection.
        let doc = CTeDocument::new(
            Cnpj::parse_digits("11222333000182").unwrap(),
            "001",
            "000000004",
            Timestamp::from_ms(0),
            Modal::Highway,
            Uf::new(35).unwrap(),
            Uf::new(35).unwrap(),
            1,
            "cargo",
            "00000003",
        )
        .unwrap();
        assert!(!doc.establishment.check_digits_valid());
        assert!(doc.key_consistent());
    }
}
