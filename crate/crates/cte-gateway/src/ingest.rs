//! The pipe-delimited TXT grammar a TMS drops into the IN directory.
//!
//! Three record types: `CTE` issues a document, `CANCEL` withdraws an
//! approved one, `CANCELNUM` voids an unused number range. Parsing is
//! strict about field counts and shapes; a bad line becomes a dated `ERR`
//! record in OUT, never a panic and never a silent skip.
//!
//! Issuer CNPJs are checked for shape only. A mistyped check digit must
//! travel all the way to the authority so the rejection comes back as a
//! certificate/establishment mismatch, the same way production rejects it.

use cte_core::{AccessKey, Cnpj, Modal, Timestamp, Uf};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IssueLine {
    pub establishment: Cnpj,
    pub series: String,
    pub number: String,
    pub issued: Timestamp,
    pub origin: Uf,
    pub dest: Uf,
    pub modal: Modal,
    pub value_cents: u64,
    pub cargo: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedLine {
    Issue(IssueLine),
    Cancel {
        access_key: String,
        reason: String,
    },
    CancelNumbering {
        establishment: Cnpj,
        series: String,
        from: u32,
        to: u32,
        reason: String,
    },
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("{0}")]
pub struct LineError(pub String);

fn err(detail: impl Into<String>) -> LineError {
    LineError(detail.into())
}

pub fn parse_line(line: &str) -> Result<ParsedLine, LineError> {
    let fields: Vec<&str> = line.split('|').collect();
    match fields[0] {
        "CTE" => parse_issue(&fields),
        "CANCEL" => parse_cancel(&fields),
        "CANCELNUM" => parse_cancel_numbering(&fields),
        other => Err(err(format!("unknown record type {other:?}"))),
    }
}

fn expect_fields(fields: &[&str], n: usize, shape: &str) -> Result<(), LineError> {
    if fields.len() == n {
        Ok(())
    } else {
        Err(err(format!(
            "expected {n} fields ({shape}), got {}",
            fields.len()
        )))
    }
}

fn digits(field: &str, value: &str, len: usize) -> Result<String, LineError> {
    if value.len() == len && value.bytes().all(|b| b.is_ascii_digit()) {
        Ok(value.to_string())
    } else {
        Err(err(format!("{field} must be {len} digits, got {value:?}")))
    }
}

fn parse_issue(fields: &[&str]) -> Result<ParsedLine, LineError> {
    expect_fields(
        fields,
        10,
        "CTE|cnpj|series|number|issued|origin|dest|modal|value_cents|cargo",
    )?;
    let establishment =
        Cnpj::parse_digits(fields[1]).map_err(|e| err(format!("cnpj: {e}")))?;
    let series = digits("series", fields[2], 3)?;
    let number = digits("number", fields[3], 9)?;
    let issued =
        Timestamp::parse_rfc3339(fields[4]).map_err(|e| err(format!("issued: {e}")))?;
    let origin = Uf::parse(fields[5]).map_err(|e| err(format!("origin: {e}")))?;
    let dest = Uf::parse(fields[6]).map_err(|e| err(format!("dest: {e}")))?;
    let modal = Modal::parse(fields[7]).map_err(|e| err(format!("modal: {e}")))?;
    let value_cents: u64 = fields[8]
        .parse()
        .map_err(|_| err(format!("value_cents must be an integer, got {:?}", fields[8])))?;
    Ok(ParsedLine::Issue(IssueLine {
        establishment,
        series,
        number,
        issued,
        origin,
        dest,
        modal,
        value_cents,
        cargo: fields[9].to_string(),
    }))
}

fn parse_cancel(fields: &[&str]) -> Result<ParsedLine, LineError> {
    expect_fields(fields, 3, "CANCEL|access_key|reason")?;
    let key = AccessKey::parse(fields[1]).map_err(|e| err(format!("access_key: {e}")))?;
    Ok(ParsedLine::Cancel {
        access_key: key.as_str().to_string(),
        reason: fields[2].to_string(),
    })
}

fn parse_cancel_numbering(fields: &[&str]) -> Result<ParsedLine, LineError> {
    expect_fields(fields, 5, "CANCELNUM|cnpj|series|from-to|reason")?;
    let establishment =
        Cnpj::parse_digits(fields[1]).map_err(|e| err(format!("cnpj: {e}")))?;
    let series = digits("series", fields[2], 3)?;
    let (from_s, to_s) = fields[3]
        .split_once('-')
        .ok_or_else(|| err(format!("range must be from-to, got {:?}", fields[3])))?;
    let from: u32 = from_s
        .parse()
        .map_err(|_| err(format!("range start must be an integer, got {from_s:?}")))?;
    let to: u32 = to_s
        .parse()
        .map_err(|_| err(format!("range end must be an integer, got {to_s:?}")))?;
    if from > to {
        return Err(err(format!("inverted range {from}-{to}")));
    }
    Ok(ParsedLine::CancelNumbering {
        establishment,
        series,
        from,
        to,
        reason: fields[4].to_string(),
    })
}
