//! Brazilian federation-unit (UF) codes.
//!
//! Two-digit IBGE codes; every envelope and access key carries one, and an
//! invalid or absent code is a connection-class error on the wire.

use serde::{Deserialize, Serialize};

/// The 27 valid IBGE codes with their postal abbreviations.
const UF_TABLE: [(u8, &str); 27] = [
    (11, "RO"),
    (12, "AC"),
    (13, "AM"),
    (14, "RR"),
    (15, "PA"),
    (16, "AP"),
    (17, "TO"),
    (21, "MA"),
    (22, "PI"),
    (23, "CE"),
    (24, "RN"),
    (25, "PB"),
    (26, "PE"),
    (27, "AL"),
    (28, "SE"),
    (29, "BA"),
    (31, "MG"),
    (32, "ES"),
    (33, "RJ"),
    (35, "SP"),
    (41, "PR"),
    (42, "SC"),
    (43, "RS"),
    (50, "MS"),
    (51, "MT"),
    (52, "GO"),
    (53, "DF"),
];

/// A validated federation-unit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Uf(u8);

impl Uf {
    pub fn new(code: u8) -> Result<Self, UfError> {
        if UF_TABLE.iter().any(|(c, _)| *c == code) {
            Ok(Uf(code))
        } else {
            Err(UfError::UnknownCode(code))
        }
    }

    /// Parses the two-digit decimal form used on the wire and in TXT records.
    pub fn parse(s: &str) -> Result<Self, UfError> {
        if s.len() != 2 || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(UfError::BadFormat(s.to_string()));
        }
        Self::new(s.parse::<u8>().expect("two digits"))
    }

    pub const fn code(self) -> u8 {
        self.0
    }

    /// Two-digit zero-padded decimal form.
    pub fn as_str(self) -> String {
        format!("{:02}", self.0)
    }

    /// Postal abbreviation, e.g. 35 → "SP".
    pub fn abbrev(self) -> &'static str {
        UF_TABLE
            .iter()
            .find(|(c, _)| *c == self.0)
            .map(|(_, a)| *a)
            .expect("constructed from table")
    }
}

impl TryFrom<u8> for Uf {
    type Error = UfError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Uf::new(v)
    }
}

impl From<Uf> for u8 {
    fn from(u: Uf) -> u8 {
        u.0
    }
}

impl std::fmt::Display for Uf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:02}", self.0)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum UfError {
    #[error("unknown federation-unit code {0}")]
    UnknownCode(u8),
    #[error("federation-unit code must be two decimal digits, got {0:?}")]
    BadFormat(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_all_table_codes() {
        for (code, _) in UF_TABLE {
            assert_eq!(Uf::new(code).unwrap().code(), code);
        }
    }

    #[test]
    fn rejects_gaps_and_out_of_range() {
        for code in [0, 1, 10, 18, 19, 20, 30, 34, 36, 40, 44, 49, 54, 99] {
            assert_eq!(Uf::new(code), Err(UfError::UnknownCode(code)));
        }
    }

    #[test]
    fn parse_requires_two_digits() {
        assert!(Uf::parse("35").is_ok());
        assert!(Uf::parse("5").is_err());
        assert!(Uf::parse("355").is_err());
        assert!(Uf::parse("3a").is_err());
        assert_eq!(Uf::parse("35").unwrap().abbrev(), "SP");
    }

    #[test]
    fn display_is_zero_padded() {
        // All current codes are two digits already; the format pins the contract.
        assert_eq!(Uf::new(11).unwrap().to_string(), "11");
        assert_eq!(Uf::new(43).unwrap().as_str(), "43");
    }
}
