//! Fixed-layout DACTE rendering: the 80-column text slip that travels
//! with the cargo.
//!
//! The layout reads only fields that never change after issuance plus the
//! batch receipt, so the same document always renders to the same bytes.
//! That makes the written file reconcilable after a crash: re-render and
//! compare. Correction notes and lifecycle status stay out for the same
//! reason.

use cte_core::CTeDocument;

pub const WIDTH: usize = 80;

pub fn file_name(access_key: &str) -> String {
    format!("DACTE-{access_key}.txt")
}

/// Pure layout. Callers are responsible for only rendering approved
/// documents; the layout itself is status-blind so recovery can rebuild
/// a slip for a document that moved on since approval.
pub fn render(doc: &CTeDocument, receipt: &str) -> String {
    let heavy = "=".repeat(WIDTH);
    let light = "-".repeat(WIDTH);
    let key = &doc.access_key;
    let cents = doc.freight_value_cents;
    let cargo: String = doc.cargo_description.chars().take(WIDTH - 10).collect();

    let mut lines: Vec<String> = Vec::with_capacity(18);
    lines.push("DACTE".into());
    lines.push(heavy.clone());
    lines.push("AUXILIARY DOCUMENT OF THE ELECTRONIC TRANSPORT RECORD".into());
    lines.push(light.clone());
    lines.push(format!(
        "ISSUER    {}    SERIES {}    NUMBER {}",
        doc.establishment.as_str(),
        doc.series,
        doc.number
    ));
    lines.push(format!("ISSUED    {}", doc.issue_instant.to_rfc3339()));
    lines.push(format!("MODAL     {}", doc.modal.as_str()));
    lines.push(format!(
        "ROUTE     {} ({}) -> {} ({})",
        doc.origin_uf.abbrev(),
        doc.origin_uf.as_str(),
        doc.dest_uf.abbrev(),
        doc.dest_uf.as_str()
    ));
    lines.push(format!("FREIGHT   R$ {}.{:02}", cents / 100, cents % 100));
    lines.push(format!("CARGO     {cargo}"));
    lines.push(light.clone());
    lines.push("ACCESS KEY".into());
    lines.push(format!("  {}", key.grouped()));
    lines.push(format!("  {}", key.as_str()));
    lines.push(light);
    lines.push(format!("RECEIPT   {receipt}"));
    lines.push(heavy);

    debug_assert!(lines.iter().all(|l| l.chars().count() <= WIDTH));
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use cte_core::{Cnpj, Modal, Timestamp, Uf};

    fn doc() -> CTeDocument {
        CTeDocument::new(
            Cnpj::parse("11222333000181").unwrap(),
            "001",
            "000000042",
            Timestamp::parse_rfc3339("2026-03-01T09:30:00Z").unwrap(),
            Modal::Highway,
            Uf::new(35).unwrap(),
            Uf::new(43).unwrap(),
            1_234_567,
            "x".repeat(200).as_str(),
            "00000042",
        )
        .unwrap()
    }

    #[test]
    fn layout_is_deterministic_and_bounded() {
        let d = doc();
        let a = render(&d, "351234567800042");
        let b = render(&d, "351234567800042");
        assert_eq!(a, b);
        assert!(a.lines().all(|l| l.chars().count() <= WIDTH));
        assert_eq!(a.lines().next(), Some("DACTE"));
        assert!(a.ends_with('\n'));
    }

    #[test]
    fn slip_carries_the_scannable_key_and_receipt() {
        let d = doc();
        let slip = render(&d, "351234567800042");
        assert!(slip.contains(d.access_key.as_str()));
        assert!(slip.contains(&d.access_key.grouped()));
        assert!(slip.contains("351234567800042"));
        assert!(slip.contains("R$ 12345.67"));
        assert!(slip.contains("SP (35) -> RS (43)"));
    }

    #[test]
    fn status_and_corrections_do_not_change_the_bytes() {
        let mut d = doc();
        let before = render(&d, "351234567800042");
        d.status = cte_core::LifecycleStatus::Cancelled;
        d.correction_notes.push("consignee street corrected".into());
        assert_eq!(render(&d, "351234567800042"), before);
    }
}
