//! Receipt numbers.
//!
//! Fifteen decimal digits: federation unit (2) + epoch seconds (10) +
//! per-second sequence (3). Issued by the authority strictly increasing in
//! arrival order; the generator lives with the authority, the format here.

use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::uf::Uf;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReceiptNumber(String);

impl ReceiptNumber {
    pub fn parse(s: &str) -> Result<Self, ReceiptError> {
        if s.len() != 15 || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(ReceiptError::Shape(s.to_string()));
        }
        Uf::parse(&s[0..2]).map_err(|_| ReceiptError::Uf(s[0..2].to_string()))?;
        Ok(ReceiptNumber(s.to_string()))
    }

    /// Assembles from components; `epoch_seconds` must fit 10 digits and
    /// `sequence` 3.
    pub fn assemble(uf: Uf, epoch_seconds: u64, sequence: u16) -> Result<Self, ReceiptError> {
        if epoch_seconds > 9_999_999_999 {
            return Err(ReceiptError::EpochRange(epoch_seconds));
        }
        if sequence > 999 {
            return Err(ReceiptError::SequenceRange(sequence));
        }
        Ok(ReceiptNumber(format!(
            "{}{:010}{:03}",
            uf.as_str(),
            epoch_seconds,
            sequence
        )))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn uf(&self) -> Uf {
        Uf::parse(&self.0[0..2]).expect("validated at construction")
    }

    pub fn epoch_seconds(&self) -> u64 {
        self.0[2..12].parse().expect("digits")
    }

    pub fn issued_at(&self) -> Timestamp {
        Timestamp::from_ms(self.epoch_seconds() * 1_000)
    }

    pub fn sequence(&self) -> u16 {
        self.0[12..15].parse().expect("digits")
    }

    /// Numeric value for ordering checks.
    pub fn as_u128(&self) -> u128 {
        self.0.parse().expect("15 digits")
    }
}

impl std::fmt::Display for ReceiptNumber {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ReceiptError {
    #[error("receipt number must be 15 decimal digits, got {0:?}")]
    Shape(String),
    #[error("receipt number carries unknown federation unit {0}")]
    Uf(String),
    #[error("epoch seconds {0} does not fit 10 digits")]
    EpochRange(u64),
    #[error("sequence {0} does not fit 3 digits")]
    SequenceRange(u16),
}
