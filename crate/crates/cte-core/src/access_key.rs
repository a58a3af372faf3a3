//! 44-digit CT-e access keys.
//!
//! Layout (positions, width):
//! UF (0,2) + year-month (2,4) + issuer CNPJ (6,14) + model "57" (20,2) +
//! series (22,3) + number (25,9) + emission type (34,1) + random (35,8) +
//! check digit (43,1).
//!
//! The check digit is mod-11 over the first 43 digits with weights cycling
//! 2..9 starting from the rightmost digit; a raw value of 10 or 11 becomes 0.

use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::cnpj::Cnpj;
use crate::uf::Uf;

pub const MODEL: &str = "57";

/// A structurally valid access key: 44 digits, verifying check digit, model
/// "57", known UF. The issuer slice is shape-checked only, so keys computed
/// from mistyped CNPJs can flow to the authority that rejects them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AccessKey(String);

impl AccessKey {
    /// Computes the key for a document. `yymm` comes from the issue instant
    /// (UTC), the UF from the service origin.
    pub fn compute(
        uf: Uf,
        issue_instant: Timestamp,
        issuer: &Cnpj,
        series: &str,
        number: &str,
        emission_type: u8,
        random: &str,
    ) -> Result<Self, AccessKeyError> {
        require_digits("series", series, 3)?;
        require_digits("number", number, 9)?;
        require_digits("random", random, 8)?;
        if emission_type > 9 {
            return Err(AccessKeyError::FieldWidth {
                field: "emission_type",
                expected: 1,
                got: 2,
            });
        }
        let yymm = yymm_of(issue_instant);
        let body = format!(
            "{}{}{}{}{}{}{}{}",
            uf.as_str(),
            yymm,
            issuer.as_str(),
            MODEL,
            series,
            number,
            emission_type,
            random
        );
        debug_assert_eq!(body.len(), 43);
        let cd = check_digit(body.as_bytes());
        Ok(AccessKey(format!("{body}{cd}")))
    }

    /// Parses and validates a rendered key.
    pub fn parse(s: &str) -> Result<Self, AccessKeyError> {
        if s.len() != 44 || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(AccessKeyError::Shape(s.to_string()));
        }
        if check_digit(&s.as_bytes()[..43]) != s.as_bytes()[43] - b'0' {
            return Err(AccessKeyError::CheckDigit(s.to_string()));
        }
        if &s[20..22] != MODEL {
            return Err(AccessKeyError::Model(s[20..22].to_string()));
        }
        if Uf::parse(&s[0..2]).is_err() {
            return Err(AccessKeyError::UnknownUf(s[0..2].to_string()));
        }
        Ok(AccessKey(s.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn uf(&self) -> Uf {
        Uf::parse(&self.0[0..2]).expect("validated at construction")
    }

    pub fn yymm(&self) -> &str {
        &self.0[2..6]
    }

    pub fn issuer_digits(&self) -> &str {
        &self.0[6..20]
    }

    pub fn series(&self) -> &str {
        &self.0[22..25]
    }

    pub fn number(&self) -> &str {
        &self.0[25..34]
    }

    pub fn emission_type(&self) -> u8 {
        self.0.as_bytes()[34] - b'0'
    }

    pub fn random(&self) -> &str {
        &self.0[35..43]
    }

    /// True iff the key's issuer/series/number/year-month agree with the
    /// given document fields.
    pub fn consistent_with(
        &self,
        establishment: &Cnpj,
        series: &str,
        number: &str,
        issue_instant: Timestamp,
    ) -> bool {
        self.issuer_digits() == establishment.as_str()
            && self.series() == series
            && self.number() == number
            && self.yymm() == yymm_of(issue_instant)
    }

    /// Eleven 4-digit groups for printed layouts.
    pub fn grouped(&self) -> String {
        self.0
            .as_bytes()
            .chunks(4)
            .map(|c| std::str::from_utf8(c).expect("ascii digits"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl std::fmt::Display for AccessKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Total predicate over any candidate string.
pub fn verify_access_key(candidate: &str) -> bool {
    AccessKey::parse(candidate).is_ok()
}

fn yymm_of(instant: Timestamp) -> String {
    let rendered = instant.to_rfc3339();
    // RFC 3339: YYYY-MM-..; take YY and MM.
    format!("{}{}", &rendered[2..4], &rendered[5..7])
}

fn check_digit(body: &[u8]) -> u8 {
    let mut sum: u32 = 0;
    let mut weight: u32 = 2;
    for b in body.iter().rev() {
        sum += u32::from(b - b'0') * weight;
        weight = if weight == 9 { 2 } else { weight + 1 };
    }
    let dv = 11 - (sum % 11);
    if dv >= 10 {
        0
    } else {
        dv as u8
    }
}

fn require_digits(field: &'static str, s: &str, width: usize) -> Result<(), AccessKeyError> {
    if s.len() == width && s.bytes().all(|b| b.is_ascii_digit()) {
        Ok(())
    } else {
        Err(AccessKeyError::FieldWidth {
            field,
            expected: width,
            got: s.len(),
        })
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum AccessKeyError {
    #[error("access key must be 44 decimal digits, got {0:?}")]
    Shape(String),
    #[error("access key check digit does not verify: {0}")]
    CheckDigit(String),
    #[error("access key model must be 57, got {0}")]
    Model(String),
    #[error("access key carries unknown federation unit {0}")]
    UnknownUf(String),
    #[error("{field} must be {expected} decimal digits, got length {got}")]
    FieldWidth {
        field: &'static str,
        expected: usize,
        got: usize,
    },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_inputs() -> (Uf, Timestamp, Cnpj) {
        (
            Uf::new(35).unwrap(),
            Timestamp::parse_rfc3339("2026-08-19T12:00:00Z").unwrap(),
            Cnpj::parse("11222333000181").unwrap(),
        )
    }

    #[test]
    fn matches_frozen_oracle_keys() {
        let (uf, at, cnpj) = fixture_inputs();
        let k1 = AccessKey::compute(uf, at, &cnpj, "001", "000000001", 1, "00000000").unwrap();
        assert_eq!(k1.as_str(), "35260811222333000181570010000000011000000006");
        let k2 = AccessKey::compute(uf, at, &cnpj, "001", "000000002", 1, "00000001").unwrap();
        assert_eq!(k2.as_str(), "35260811222333000181570010000000021000000011");

        let rs = Uf::new(43).unwrap();
        let at2 = Timestamp::parse_rfc3339("2026-01-05T08:30:00Z").unwrap();
        let c2 = Cnpj::parse("04550497000172").unwrap();
        let k3 = AccessKey::compute(rs, at2, &c2, "002", "000012345", 1, "00424242").unwrap();
        assert_eq!(k3.as_str(), "43260104550497000172570020000123451004242429");
    }

    #[test]
    fn compute_is_deterministic() {
        let (uf, at, cnpj) = fixture_inputs();
        let a = AccessKey::compute(uf, at, &cnpj, "001", "000000007", 1, "12345678").unwrap();
        let b = AccessKey::compute(uf, at, &cnpj, "001", "000000007", 1, "12345678").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn computed_keys_parse_back() {
        let (uf, at, cnpj) = fixture_inputs();
        let k = AccessKey::compute(uf, at, &cnpj, "123", "000000042", 2, "87654321").unwrap();
        let parsed = AccessKey::parse(k.as_str()).unwrap();
        assert_eq!(parsed, k);
        assert!(verify_access_key(k.as_str()));
        assert!(parsed.consistent_with(&cnpj, "123", "000000042", at));
        assert_eq!(parsed.uf().code(), 35);
        assert_eq!(parsed.yymm(), "2608");
        assert_eq!(parsed.emission_type(), 2);
        assert_eq!(parsed.random(), "87654321");
    }

    #[test]
    fn field_width_errors() {
        let (uf, at, cnpj) = fixture_inputs();
        let bad = AccessKey::compute(uf, at, &cnpj, "12", "000000042", 1, "87654321");
        assert!(matches!(
            bad,
            Err(AccessKeyError::FieldWidth { field: "series", .. })
        ));
        let bad = AccessKey::compute(uf, at, &cnpj, "123", "42", 1, "87654321");
        assert!(matches!(
            bad,
            Err(AccessKeyError::FieldWidth { field: "number", .. })
        ));
        let bad = AccessKey::compute(uf, at, &cnpj, "123", "000000042", 10, "87654321");
        assert!(matches!(
            bad,
            Err(AccessKeyError::FieldWidth {
                field: "emission_type",
                ..
            })
        ));
    }

    #[test]
    fn check_digit_position_mutation_always_detected() {
        let (uf, at, cnpj) = fixture_inputs();
        let k = AccessKey::compute(uf, at, &cnpj, "001", "000000001", 1, "00000000").unwrap();
        let bytes = k.as_str().as_bytes();
        for delta in 1..10u8 {
            let mut m = bytes.to_vec();
            m[43] = b'0' + (m[43] - b'0' + delta) % 10;
            let mutated = String::from_utf8(m).unwrap();
            assert!(!verify_access_key(&mutated), "{mutated}");
        }
    }

    #[test]
    fn grouped_layout_has_eleven_blocks() {
        let (uf, at, cnpj) = fixture_inputs();
        let k = AccessKey::compute(uf, at, &cnpj, "001", "000000001", 1, "00000000").unwrap();
        let g = k.grouped();
        assert_eq!(g.split(' ').count(), 11);
        assert_eq!(g.replace(' ', ""), k.as_str());
    }

    #[test]
    fn parse_rejects_model_and_uf_violations() {
        let (uf, at, cnpj) = fixture_inputs();
        let k = AccessKey::compute(uf, at, &cnpj, "001", "000000001", 1, "00000000").unwrap();
        // Swap the model digits and fix up the check digit to isolate the check.
        let mut body = k.as_str()[..43].to_string();
        body.replace_range(20..22, "99");
        let cd = super::check_digit(body.as_bytes());
        let forged = format!("{body}{cd}");
        assert_eq!(
            AccessKey::parse(&forged),
            Err(AccessKeyError::Model("99".into()))
        );

        let mut body = k.as_str()[..43].to_string();
        body.replace_range(0..2, "99");
        let cd = super::check_digit(body.as_bytes());
        let forged = format!("{body}{cd}");
        assert_eq!(
            AccessKey::parse(&forged),
            Err(AccessKeyError::UnknownUf("99".into()))
        );
    }
}
