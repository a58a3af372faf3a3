//! Registered documents and voided numbering ranges.

use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocState {
    Approved,
    Cancelled,
}

#[derive(Debug)]
pub struct RegisteredDoc {
    pub establishment: String,
    pub series: String,
    pub number: u32,
    pub state: DocState,
    pub corrections: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoidedRange {
    pub establishment: String,
    pub series: String,
    pub from: u32,
    pub to: u32,
}

impl VoidedRange {
    fn covers(&self, establishment: &str, series: &str, number: u32) -> bool {
        self.establishment == establishment
            && self.series == series
            && (self.from..=self.to).contains(&number)
    }
}

/// Every access key the authority has ever approved, plus voided numbering.
/// A key is never simultaneously approved and cancelled: `state` moves
/// one-way from Approved to Cancelled.
#[derive(Debug, Default)]
pub struct Registry {
    docs: HashMap<String, RegisteredDoc>,
    voided: Vec<VoidedRange>,
}

impl Registry {
    pub fn contains(&self, access_key: &str) -> bool {
        self.docs.contains_key(access_key)
    }

    pub fn get(&self, access_key: &str) -> Option<&RegisteredDoc> {
        self.docs.get(access_key)
    }

    pub fn register_approved(
        &mut self,
        access_key: String,
        establishment: String,
        series: String,
        number: u32,
    ) {
        self.docs.insert(
            access_key,
            RegisteredDoc {
                establishment,
                series,
                number,
                state: DocState::Approved,
                corrections: Vec::new(),
            },
        );
    }

    /// Moves an approved key to cancelled; false when the key is missing or
    /// not currently approved.
    pub fn cancel(&mut self, access_key: &str) -> bool {
        match self.docs.get_mut(access_key) {
            Some(doc) if doc.state == DocState::Approved => {
                doc.state = DocState::Cancelled;
                true
            }
            _ => false,
        }
    }

    pub fn add_correction(&mut self, access_key: &str, text: String) -> bool {
        match self.docs.get_mut(access_key) {
            Some(doc) if doc.state == DocState::Approved => {
                doc.corrections.push(text);
                true
            }
            _ => false,
        }
    }

    /// True iff any number in the range was ever approved (including keys
    /// cancelled afterwards: the number was used).
    pub fn range_ever_used(
        &self,
        establishment: &str,
        series: &str,
        from: u32,
        to: u32,
    ) -> bool {
        self.docs.values().any(|d| {
            d.establishment == establishment
                && d.series == series
                && (from..=to).contains(&d.number)
        })
    }

    pub fn void_range(&mut self, range: VoidedRange) {
        if !self.voided.contains(&range) {
            self.voided.push(range);
        }
    }

    pub fn is_number_voided(&self, establishment: &str, series: &str, number: u32) -> bool {
        self.voided
            .iter()
            .any(|r| r.covers(establishment, series, number))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cancel_is_one_way() {
        let mut r = Registry::default();
        r.register_approved("k1".into(), "e".into(), "001".into(), 7);
        assert!(r.cancel("k1"));
        assert!(!r.cancel("k1"));
        assert_eq!(r.get("k1").unwrap().state, DocState::Cancelled);
    }

    #[test]
    fn cancelled_numbers_still_count_as_used() {
        let mut r = Registry::default();
        r.register_approved("k1".into(), "e".into(), "001".into(), 10);
        r.cancel("k1");
        assert!(r.range_ever_used("e", "001", 5, 15));
        assert!(!r.range_ever_used("e", "001", 11, 15));
        assert!(!r.range_ever_used("e", "002", 5, 15));
    }

    #[test]
    fn voided_range_lookup_respects_all_fields() {
        let mut r = Registry::default();
        r.void_range(VoidedRange {
            establishment: "e".into(),
            series: "001".into(),
            from: 10,
            to: 20,
        });
        assert!(r.is_number_voided("e", "001", 10));
        assert!(r.is_number_voided("e", "001", 20));
        assert!(!r.is_number_voided("e", "001", 21));
        assert!(!r.is_number_voided("e", "002", 15));
        assert!(!r.is_number_voided("f", "001", 15));
    }
}
