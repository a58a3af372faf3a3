//! Response-time bookkeeping and receipt numbering.

use cte_core::{ReceiptNumber, Timestamp, Uf};

/// Trailing five minutes; the window is half-open `(now - WINDOW, now]`.
pub const WINDOW_MS: u64 = 300_000;

/// Completed-batch timing samples (received_at, completed_at).
#[derive(Debug, Default)]
pub struct ResponseWindow {
    samples: Vec<(Timestamp, Timestamp)>,
}

impl ResponseWindow {
    pub fn record(&mut self, received_at: Timestamp, completed_at: Timestamp) {
        self.samples.push((received_at, completed_at));
    }

    /// Integer-millisecond mean, rounded half up, over samples whose
    /// completion lies in `(now - 5 min, now]`. None when the window holds
    /// no samples.
    pub fn average_ms(&self, now: Timestamp) -> Option<u64> {
        let floor = now.as_ms().saturating_sub(WINDOW_MS);
        let mut sum: u128 = 0;
        let mut n: u128 = 0;
        for (received, completed) in &self.samples {
            let c = completed.as_ms();
            if c > floor && c <= now.as_ms() {
                sum += u128::from(c.saturating_sub(received.as_ms()));
                n += 1;
            }
        }
        if n == 0 {
            None
        } else {
            Some(((2 * sum + n) / (2 * n)) as u64)
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Issues strictly increasing receipt numbers: UF(2) + epoch seconds(10) +
/// sequence(3). The epoch never goes backwards; a sequence overflow within
/// one second borrows the next second.
#[derive(Debug)]
pub struct ReceiptMint {
    place: Uf,
    last_epoch: u64,
    last_sequence: u16,
}

impl ReceiptMint {
    pub fn new(place: Uf) -> Self {
        ReceiptMint {
            place,
            last_epoch: 0,
            last_sequence: 0,
        }
    }

    pub fn place(&self) -> Uf {
        self.place
    }

    pub fn next(&mut self, now: Timestamp) -> ReceiptNumber {
        let epoch = now.epoch_seconds().max(self.last_epoch);
        if epoch == self.last_epoch {
            if self.last_sequence == 999 {
                self.last_epoch += 1;
                self.last_sequence = 0;
            } else {
                self.last_sequence += 1;
            }
        } else {
            self.last_epoch = epoch;
            self.last_sequence = 0;
        }
        ReceiptNumber::assemble(self.place, self.last_epoch, self.last_sequence)
            .expect("mint keeps fields in range")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(ms: u64) -> Timestamp {
        Timestamp::from_ms(ms)
    }

    #[test]
    fn empty_window_has_no_average() {
        let w = ResponseWindow::default();
        assert_eq!(w.average_ms(ts(1_000_000)), None);
    }

    #[test]
    fn mean_rounds_half_up() {
        let mut w = ResponseWindow::default();
        let now = ts(1_000_000);
        // Durations 100 and 101 ms -> mean 100.5 -> 101.
        w.record(ts(999_800), ts(999_900));
        w.record(ts(999_799), ts(999_900));
        assert_eq!(w.average_ms(now), Some(101));
    }

    #[test]
    fn window_excludes_exactly_five_minutes_old() {
        let mut w = ResponseWindow::default();
        let now = ts(1_000_000);
        // Completed exactly at now - 300s: outside the half-open window.
        w.record(ts(600_000), ts(700_000));
        assert_eq!(w.average_ms(now), None);
        // One millisecond younger: inside.
        w.record(ts(600_001), ts(700_001));
        assert_eq!(w.average_ms(now), Some(100_000));
    }

    #[test]
    fn samples_at_now_are_included() {
        let mut w = ResponseWindow::default();
        let now = ts(1_000_000);
        w.record(ts(999_850), now);
        assert_eq!(w.average_ms(now), Some(150));
    }

    #[test]
    fn receipts_strictly_increase_even_when_time_stalls() {
        let mut mint = ReceiptMint::new(Uf::new(35).unwrap());
        let now = ts(1_700_000_000_000);
        let mut previous = mint.next(now);
        for _ in 0..2_100 {
            let next = mint.next(now);
            assert!(next.as_u128() > previous.as_u128());
            previous = next;
        }
    }

    #[test]
    fn receipt_epoch_never_regresses() {
        let mut mint = ReceiptMint::new(Uf::new(43).unwrap());
        let a = mint.next(ts(5_000_000));
        let b = mint.next(ts(4_000_000));
        assert!(b.as_u128() > a.as_u128());
        assert_eq!(b.epoch_seconds(), a.epoch_seconds());
    }
}
