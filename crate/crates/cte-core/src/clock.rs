//! Time access for the whole workspace.
//!
//! Every component reads time through [`Clock`] so tests and the simulator can
//! drive a [`VirtualClock`] deterministically while production binaries use
//! [`SystemClock`].

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use chrono::{DateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Serialize};

/// Milliseconds since the Unix epoch, UTC.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub const fn from_ms(ms: u64) -> Self {
        Timestamp(ms)
    }

    pub const fn as_ms(self) -> u64 {
        self.0
    }

    /// Saturating addition of a millisecond delta.
    pub const fn plus_ms(self, ms: u64) -> Self {
        Timestamp(self.0.saturating_add(ms))
    }

    /// Saturating subtraction of a millisecond delta.
    pub const fn minus_ms(self, ms: u64) -> Self {
        Timestamp(self.0.saturating_sub(ms))
    }

    /// Truncates to whole seconds.
    pub const fn truncate_to_seconds(self) -> Self {
        Timestamp(self.0 - self.0 % 1_000)
    }

    pub const fn epoch_seconds(self) -> u64 {
        self.0 / 1_000
    }

    fn datetime(self) -> DateTime<Utc> {
        Utc.timestamp_millis_opt(self.0 as i64)
            .single()
            .expect("timestamp within chrono range")
    }

    /// RFC 3339 UTC at second precision, e.g. `2026-08-19T12:00:00Z`.
    pub fn to_rfc3339(self) -> String {
        self.datetime().to_rfc3339_opts(SecondsFormat::Secs, true)
    }

    /// RFC 3339 UTC at millisecond precision.
    pub fn to_rfc3339_millis(self) -> String {
        self.datetime().to_rfc3339_opts(SecondsFormat::Millis, true)
    }

    /// UTC calendar date, `YYYY-MM-DD`.
    pub fn date(self) -> String {
        self.datetime().format("%Y-%m-%d").to_string()
    }

    /// Parses an RFC 3339 timestamp (any offset; normalized to UTC).
    pub fn parse_rfc3339(s: &str) -> Result<Self, ClockError> {
        let dt = DateTime::parse_from_rfc3339(s)
            .map_err(|e| ClockError::BadTimestamp(format!("{s:?}: {e}")))?;
        let ms = dt.timestamp_millis();
        if ms < 0 {
            return Err(ClockError::BadTimestamp(format!("{s:?}: before epoch")));
        }
        Ok(Timestamp(ms as u64))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ClockError {
    #[error("invalid timestamp {0}")]
    BadTimestamp(String),
}

/// Source of the current instant.
pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

/// Wall clock.
#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        Timestamp(Utc::now().timestamp_millis() as u64)
    }
}

/// Manually advanced clock shared across components under test.
#[derive(Debug, Clone, Default)]
pub struct VirtualClock {
    now_ms: Arc<AtomicU64>,
}

impl VirtualClock {
    pub fn new(start: Timestamp) -> Self {
        VirtualClock {
            now_ms: Arc::new(AtomicU64::new(start.as_ms())),
        }
    }

    pub fn set(&self, to: Timestamp) {
        self.now_ms.store(to.as_ms(), Ordering::SeqCst);
    }

    pub fn advance_ms(&self, ms: u64) {
        self.now_ms.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Timestamp {
        Timestamp(self.now_ms.load(Ordering::SeqCst))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rfc3339_round_trip_seconds() {
        let t = Timestamp::parse_rfc3339("2026-08-19T12:00:00Z").unwrap();
        assert_eq!(t.to_rfc3339(), "2026-08-19T12:00:00Z");
        assert_eq!(t.as_ms() % 1_000, 0);
    }

    #[test]
    fn rfc3339_offset_normalized_to_utc() {
        let t = Timestamp::parse_rfc3339("2026-08-19T09:00:00-03:00").unwrap();
        assert_eq!(t.to_rfc3339(), "2026-08-19T12:00:00Z");
    }

    #[test]
    fn truncation_drops_millis() {
        let t = Timestamp::from_ms(1_755_607_200_123);
        assert_eq!(t.truncate_to_seconds().as_ms(), 1_755_607_200_000);
    }

    #[test]
    fn virtual_clock_advances() {
        let c = VirtualClock::new(Timestamp::from_ms(1_000));
        assert_eq!(c.now().as_ms(), 1_000);
        c.advance_ms(60_000);
        assert_eq!(c.now().as_ms(), 61_000);
        c.set(Timestamp::from_ms(5));
        assert_eq!(c.now().as_ms(), 5);
    }

    #[test]
    fn millis_format_preserved() {
        let t = Timestamp::from_ms(1_787_140_800_123);
        assert_eq!(t.to_rfc3339_millis(), "2026-08-19T12:00:00.123Z");
    }

    #[test]
    fn date_is_utc_calendar_day() {
        let t = Timestamp::parse_rfc3339("2026-08-19T23:59:59Z").unwrap();
        assert_eq!(t.date(), "2026-08-19");
    }
}
