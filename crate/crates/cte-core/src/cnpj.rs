//! CNPJ identifiers (Brazilian legal-entity registry numbers).
//!
//! Fourteen decimal digits; the last two are mod-11 check digits over the
//! first twelve. Mistyped CNPJs are the dominant real-world rejection cause,
//! so the check-digit predicate is a total function usable on raw input, and
//! a shape-only constructor exists to carry upstream typos through the
//! pipeline to the authority that rejects them.

use serde::{Deserialize, Serialize};

const WEIGHTS_FIRST: [u32; 12] = [5, 4, 3, 2, 9, 8, 7, 6, 5, 4, 3, 2];
const WEIGHTS_SECOND: [u32; 13] = [6, 5, 4, 3, 2, 9, 8, 7, 6, 5, 4, 3, 2];

/// A 14-digit CNPJ. Construction via [`Cnpj::parse`] guarantees valid check
/// digits; [`Cnpj::parse_digits`] guarantees shape only (14 decimal digits)
/// and is reserved for ingesting data whose typos must reach the authority.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cnpj(String);

impl Cnpj {
    /// Parses and fully validates: 14 digits, both check digits verify.
    pub fn parse(s: &str) -> Result<Self, CnpjError> {
        let c = Self::parse_digits(s)?;
        if c.check_digits_valid() {
            Ok(c)
        } else {
            Err(CnpjError::CheckDigits(s.to_string()))
        }
    }

    /// Shape-only parse: exactly 14 decimal digits, check digits not enforced.
    pub fn parse_digits(s: &str) -> Result<Self, CnpjError> {
        if s.len() == 14 && s.bytes().all(|b| b.is_ascii_digit()) {
            Ok(Cnpj(s.to_string()))
        } else {
            Err(CnpjError::Shape(s.to_string()))
        }
    }

    /// Completes a 12-digit base with its two check digits.
    pub fn complete(base12: &str) -> Result<Self, CnpjError> {
        if base12.len() != 12 || !base12.bytes().all(|b| b.is_ascii_digit()) {
            return Err(CnpjError::Shape(base12.to_string()));
        }
        let digits: Vec<u32> = base12.bytes().map(|b| u32::from(b - b'0')).collect();
        let d13 = check_digit(&digits, &WEIGHTS_FIRST);
        let mut with13 = digits;
        with13.push(d13);
        let d14 = check_digit(&with13, &WEIGHTS_SECOND);
        Ok(Cnpj(format!("{base12}{d13}{d14}")))
    }

    /// True iff both check digits verify. Total over any constructed value.
    pub fn check_digits_valid(&self) -> bool {
        let digits: Vec<u32> = self.0.bytes().map(|b| u32::from(b - b'0')).collect();
        let d13 = check_digit(&digits[..12], &WEIGHTS_FIRST);
        let d14 = check_digit(&digits[..13], &WEIGHTS_SECOND);
        digits[12] == d13 && digits[13] == d14
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for Cnpj {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn check_digit(digits: &[u32], weights: &[u32]) -> u32 {
    debug_assert_eq!(digits.len(), weights.len());
    let sum: u32 = digits.iter().zip(weights).map(|(d, w)| d * w).sum();
    let rem = sum % 11;
    if rem < 2 {
        0
    } else {
        11 - rem
    }
}

/// Total predicate: true iff `candidate` is 14 decimal digits with verifying
/// check digits.
pub fn validate_cnpj(candidate: &str) -> bool {
    Cnpj::parse(candidate).is_ok()
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CnpjError {
    #[error("CNPJ must be 14 decimal digits, got {0:?}")]
    Shape(String),
    #[error("CNPJ check digits do not verify: {0}")]
    CheckDigits(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    // Values frozen from an independent oracle implementation.
    const VALID: [&str; 8] = [
        "11222333000181",
        "04550497000172",
        "19192939000123",
        "33333333000191",
        "98765432000198",
        "12345678000195",
        "59020586000107",
        "00000000000000",
    ];

    #[test]
    fn oracle_corpus_validates() {
        for v in VALID {
            assert!(validate_cnpj(v), "{v} must validate");
            assert_eq!(Cnpj::complete(&v[..12]).unwrap().as_str(), v);
        }
    }

    #[test]
    fn all_zero_value_is_algorithm_valid() {
        // Degenerate but correct: weighted sum 0 → remainder 0 → digit 0, twice.
        assert!(validate_cnpj("00000000000000"));
    }

    #[test]
    fn wrong_length_is_false() {
        assert!(!validate_cnpj("1234"));
        assert!(!validate_cnpj(""));
        assert!(!validate_cnpj("112223330001811"));
    }

    #[test]
    fn non_digits_are_false() {
        assert!(!validate_cnpj("11.222.333/0001"));
        assert!(!validate_cnpj("1122233300018a"));
    }

    #[test]
    fn perturbed_last_digit_fails() {
        assert!(!validate_cnpj("11222333000182"));
    }

    #[test]
    fn shape_only_parse_admits_bad_check_digits() {
        let c = Cnpj::parse_digits("11222333000182").unwrap();
        assert!(!c.check_digits_valid());
        assert_eq!(Cnpj::parse("11222333000182").unwrap_err(), CnpjError::CheckDigits("11222333000182".into()));
    }

    #[test]
    fn perturbing_any_check_digit_position_fails() {
        for v in VALID {
            for pos in [12, 13] {
                let mut b = v.as_bytes().to_vec();
                b[pos] = b'0' + (b[pos] - b'0' + 1) % 10;
                let mutated = String::from_utf8(b).unwrap();
                assert!(!validate_cnpj(&mutated), "{mutated} must fail");
            }
        }
    }
}
