//! Wire contract for the seven services: envelopes, result codes, receipt
//! numbers, and the transport abstraction.

pub mod bodies;
pub mod codes;
pub mod envelope;
pub mod receipt;
pub mod transport;

use serde::{Deserialize, Serialize};

/// The seven services. Batch submission and batch tracking follow the
/// asynchronous protocol (receipt now, result later); the other five answer
/// synchronously.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ServiceKind {
    SendBatch,
    TrackBatch,
    WithdrawCte,
    WithdrawNumbering,
    TrackCteStatus,
    CorrectCte,
    TrackServiceStatus,
}

impl ServiceKind {
    pub const ALL: [ServiceKind; 7] = [
        ServiceKind::SendBatch,
        ServiceKind::TrackBatch,
        ServiceKind::WithdrawCte,
        ServiceKind::WithdrawNumbering,
        ServiceKind::TrackCteStatus,
        ServiceKind::CorrectCte,
        ServiceKind::TrackServiceStatus,
    ];

    pub const fn is_async(self) -> bool {
        matches!(self, ServiceKind::SendBatch | ServiceKind::TrackBatch)
    }

    /// Name used in envelope attributes and URL paths.
    pub const fn wire_name(self) -> &'static str {
        match self {
            ServiceKind::SendBatch => "send-batch",
            ServiceKind::TrackBatch => "track-batch",
            ServiceKind::WithdrawCte => "withdraw",
            ServiceKind::WithdrawNumbering => "withdraw-numbering",
            ServiceKind::TrackCteStatus => "track-status",
            ServiceKind::CorrectCte => "correct",
            ServiceKind::TrackServiceStatus => "service-status",
        }
    }

    pub fn path(self) -> String {
        format!("/ws/{}", self.wire_name())
    }

    pub fn from_wire_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.wire_name() == name)
    }
}

impl std::fmt::Display for ServiceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.wire_name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn async_split_is_two_five() {
        let async_count = ServiceKind::ALL.iter().filter(|s| s.is_async()).count();
        assert_eq!(async_count, 2);
        assert!(ServiceKind::SendBatch.is_async());
        assert!(ServiceKind::TrackBatch.is_async());
        assert!(!ServiceKind::WithdrawCte.is_async());
    }

    #[test]
    fn wire_names_round_trip() {
        for s in ServiceKind::ALL {
            assert_eq!(ServiceKind::from_wire_name(s.wire_name()), Some(s));
        }
        assert_eq!(ServiceKind::from_wire_name("nope"), None);
    }

    #[test]
    fn paths_are_fixed() {
        assert_eq!(ServiceKind::SendBatch.path(), "/ws/send-batch");
        assert_eq!(ServiceKind::TrackBatch.path(), "/ws/track-batch");
        assert_eq!(ServiceKind::WithdrawCte.path(), "/ws/withdraw");
        assert_eq!(
            ServiceKind::WithdrawNumbering.path(),
            "/ws/withdraw-numbering"
        );
        assert_eq!(ServiceKind::TrackCteStatus.path(), "/ws/track-status");
        assert_eq!(ServiceKind::CorrectCte.path(), "/ws/correct");
        assert_eq!(ServiceKind::TrackServiceStatus.path(), "/ws/service-status");
    }
}
