//! Result codes and the error taxonomy.
//!
//! The code table is fixed; every code maps to exactly one category. Codes
//! outside the table decode as semantic errors with an "unknown code"
//! message so responses never fail to classify.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Category {
    Success,
    E1Certificate,
    E2Xml,
    E3Connection,
    E4Semantic,
}

impl Category {
    pub const fn as_str(self) -> &'static str {
        match self {
            Category::Success => "success",
            Category::E1Certificate => "E1-certificate",
            Category::E2Xml => "E2-xml",
            Category::E3Connection => "E3-connection",
            Category::E4Semantic => "E4-semantic",
        }
    }
}

/// Well-known code constants.
pub mod code {
    pub const DOC_APPROVED: u16 = 100;
    pub const CANCEL_APPROVED: u16 = 101;
    pub const NUMBERING_CANCEL_APPROVED: u16 = 102;
    pub const BATCH_RECEIVED: u16 = 103;
    pub const BATCH_PROCESSED: u16 = 104;
    pub const BATCH_PROCESSING: u16 = 105;
    pub const SERVICE_OK: u16 = 107;
    pub const CORRECTION_REGISTERED: u16 = 134;
    pub const DUPLICATE_KEY: u16 = 204;
    pub const BATCH_TOO_LARGE: u16 = 214;
    pub const BATCH_TOO_MANY_DOCS: u16 = 216;
    pub const MIXED_ESTABLISHMENTS: u16 = 217;
    pub const XML_MALFORMED: u16 = 225;
    pub const UNSUPPORTED_VERSION: u16 = 239;
    pub const CERT_INVALID: u16 = 280;
    pub const CERT_OVERDUE: u16 = 281;
    pub const CERT_REVOKED: u16 = 282;
    pub const CERT_PREREQUISITES: u16 = 283;
    pub const CERT_CNPJ_MISMATCH: u16 = 284;
    pub const NOT_FOUND: u16 = 405;
    pub const ILLEGAL_STATE: u16 = 406;
    pub const INTERNAL: u16 = 999;
}

/// The full table: (code, category, default message).
const TABLE: [(u16, Category, &str); 23] = [
    (code::DOC_APPROVED, Category::Success, "document approved"),
    (code::CANCEL_APPROVED, Category::Success, "cancellation approved"),
    (
        code::NUMBERING_CANCEL_APPROVED,
        Category::Success,
        "numbering cancellation approved",
    ),
    (code::BATCH_RECEIVED, Category::Success, "batch received"),
    (code::BATCH_PROCESSED, Category::Success, "batch processed"),
    (code::BATCH_PROCESSING, Category::Success, "batch in processing"),
    (code::SERVICE_OK, Category::Success, "service in operation"),
    (
        code::CORRECTION_REGISTERED,
        Category::Success,
        "correction registered",
    ),
    (
        code::DUPLICATE_KEY,
        Category::E4Semantic,
        "duplicate access key",
    ),
    (
        code::BATCH_TOO_LARGE,
        Category::E2Xml,
        "batch exceeds 500 KB",
    ),
    (
        code::BATCH_TOO_MANY_DOCS,
        Category::E2Xml,
        "batch exceeds 50 documents",
    ),
    (
        code::MIXED_ESTABLISHMENTS,
        Category::E2Xml,
        "mixed establishments in batch",
    ),
    (code::XML_MALFORMED, Category::E2Xml, "XML formatting failure"),
    (
        code::UNSUPPORTED_VERSION,
        Category::E3Connection,
        "unsupported protocol version",
    ),
    (
        code::CERT_INVALID,
        Category::E1Certificate,
        "invalid certificate",
    ),
    (
        code::CERT_OVERDUE,
        Category::E1Certificate,
        "overdue certificate",
    ),
    (
        code::CERT_REVOKED,
        Category::E1Certificate,
        "revoked certificate",
    ),
    (
        code::CERT_PREREQUISITES,
        Category::E1Certificate,
        "certificate prerequisites violation",
    ),
    (
        code::CERT_CNPJ_MISMATCH,
        Category::E1Certificate,
        "certificate CNPJ mismatch",
    ),
    (code::NOT_FOUND, Category::E4Semantic, "document not found"),
    (
        code::ILLEGAL_STATE,
        Category::E4Semantic,
        "illegal lifecycle state for request",
    ),
    (
        509,
        Category::E3Connection,
        "invalid or absent federation unit",
    ),
    (code::INTERNAL, Category::E4Semantic, "internal error"),
];

pub const INVALID_UF: u16 = 509;

/// Category for any code; unknown codes are semantic errors.
pub fn category_of(code: u16) -> Category {
    TABLE
        .iter()
        .find(|(c, _, _)| *c == code)
        .map(|(_, cat, _)| *cat)
        .unwrap_or(Category::E4Semantic)
}

/// True iff the code appears in the fixed table.
pub fn is_known(code: u16) -> bool {
    TABLE.iter().any(|(c, _, _)| *c == code)
}

/// A result code with its human-readable message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultCode {
    pub code: u16,
    pub message: String,
}

impl ResultCode {
    /// Builds with the table's default message; unknown codes get
    /// "unknown code".
    pub fn known(code: u16) -> Self {
        let message = TABLE
            .iter()
            .find(|(c, _, _)| *c == code)
            .map(|(_, _, m)| (*m).to_string())
            .unwrap_or_else(|| "unknown code".to_string());
        ResultCode { code, message }
    }

    pub fn with_message(code: u16, message: impl Into<String>) -> Self {
        ResultCode {
            code,
            message: message.into(),
        }
    }

    pub fn category(&self) -> Category {
        category_of(self.code)
    }

    pub fn is_success(&self) -> bool {
        self.category() == Category::Success
    }
}

impl std::fmt::Display for ResultCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({})", self.code, self.message)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_covers_every_constant_once() {
        let mut codes: Vec<u16> = TABLE.iter().map(|(c, _, _)| *c).collect();
        codes.sort_unstable();
        codes.dedup();
        assert_eq!(codes.len(), TABLE.len(), "duplicate code in table");
        assert_eq!(TABLE.len(), 23);
    }

    #[test]
    fn category_partitions() {
        use Category::*;
        let expected: [(u16, Category); 23] = [
            (100, Success),
            (101, Success),
            (102, Success),
            (103, Success),
            (104, Success),
            (105, Success),
            (107, Success),
            (134, Success),
            (280, E1Certificate),
            (281, E1Certificate),
            (282, E1Certificate),
            (283, E1Certificate),
            (284, E1Certificate),
            (214, E2Xml),
            (216, E2Xml),
            (217, E2Xml),
            (225, E2Xml),
            (239, E3Connection),
            (509, E3Connection),
            (204, E4Semantic),
            (405, E4Semantic),
            (406, E4Semantic),
            (999, E4Semantic),
        ];
        for (code, cat) in expected {
            assert_eq!(category_of(code), cat, "code {code}");
        }
    }

    #[test]
    fn unknown_code_is_semantic_with_marker_message() {
        let rc = ResultCode::known(998);
        assert_eq!(rc.category(), Category::E4Semantic);
        assert_eq!(rc.message, "unknown code");
        assert!(!is_known(998));
    }

    #[test]
    fn success_codes_report_success() {
        assert!(ResultCode::known(103).is_success());
        assert!(!ResultCode::known(284).is_success());
    }
}
