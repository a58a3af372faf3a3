//! Durable event store for the transport-document gateway.
//!
//! Every fact the gateway learns is appended to a checksummed journal and
//! folded into an in-memory [`State`]. Restart replays the journal (optionally
//! on top of a snapshot) and must reach the exact state the process had when
//! it last returned from `append`.

mod event;
mod journal;
mod state;

use std::path::{Path, PathBuf};

pub use event::{AppliedResult, DispatchIntent, EventBody, IngestSource, JournalEvent};
pub use journal::{
    read_all, read_snapshot, truncate_for_test, write_snapshot, Journal, JournalError,
};
pub use state::{
    AnomalyRecord, BatchRecord, DayCounts, DocRecord, Filter, HistoryEntry, IntentRecord,
    OutLine, State, StateError,
};

use cte_core::Timestamp;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    Journal(#[from] JournalError),
    #[error("illegal event: {0}")]
    State(#[from] StateError),
    #[error("snapshot covers seq {covered} but journal ends at {last}")]
    SnapshotAhead { covered: u64, last: u64 },
    #[error("store poisoned by an earlier write failure: {0}")]
    Poisoned(String),
}

/// Journal plus its materialization. `open` recovers, `append` persists
/// first-time facts. A failed journal write poisons the store: memory is
/// ahead of disk and the process must restart to resynchronize.
pub struct Store {
    journal: Journal,
    snapshot_path: PathBuf,
    state: State,
    poisoned: Option<String>,
}

impl Store {
    pub fn open(journal_path: &Path, snapshot_path: &Path) -> Result<Self, StoreError> {
        let (covered, mut state) = match journal::read_snapshot::<State>(snapshot_path)? {
            Some((covered, state)) => (covered, state),
            None => (0, State::default()),
        };
        if state.last_seq() != covered {
            return Err(JournalError::Snapshot(format!(
                "state ends at seq {} but header claims {covered}",
                state.last_seq()
            ))
            .into());
        }
        let events = journal::read_all(journal_path)?;
        if let Some(last) = events.last() {
            if covered > last.seq {
                return Err(StoreError::SnapshotAhead {
                    covered,
                    last: last.seq,
                });
            }
        } else if covered > 0 {
            return Err(StoreError::SnapshotAhead { covered, last: 0 });
        }
        for event in &events {
            if event.seq <= covered {
                continue;
            }
            state.apply(event)?;
        }
        let journal = Journal::open(journal_path)?;
        Ok(Store {
            journal,
            snapshot_path: snapshot_path.to_path_buf(),
            state,
            poisoned: None,
        })
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    /// Validates, persists, and applies one event. Returns its seq and the
    /// OUT lines it produced. The record is on disk before this returns.
    pub fn append(
        &mut self,
        at: Timestamp,
        body: EventBody,
    ) -> Result<(u64, Vec<OutLine>), StoreError> {
        if let Some(why) = &self.poisoned {
            return Err(StoreError::Poisoned(why.clone()));
        }
        let event = JournalEvent {
            seq: self.state.last_seq() + 1,
            at,
            body,
        };
        // apply is all-or-nothing: an illegal event leaves state untouched
        // and never reaches the journal.
        let lines = self.state.apply(&event)?;
        if let Err(e) = self.journal.append(&event) {
            self.poisoned = Some(e.to_string());
            return Err(e.into());
        }
        Ok((event.seq, lines))
    }

    /// Writes a snapshot covering everything applied so far. The journal is
    /// kept whole; recovery skips records the snapshot already covers.
    pub fn write_snapshot(&self) -> Result<(), StoreError> {
        journal::write_snapshot(&self.snapshot_path, self.state.last_seq(), &self.state)?;
        Ok(())
    }
}
