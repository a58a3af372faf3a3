//! On-disk journal and snapshot files.
//!
//! Journal record framing, bit-exact:
//! `[u32 LE payload length][u32 LE CRC32 of payload][payload]`
//! where the payload is the JSON encoding of one [`JournalEvent`].
//!
//! Snapshot framing: magic `CTEJ1`, then `[u64 LE covered seq]`, then one
//! CRC-framed JSON record holding the materialized state.

use std::fs::{File, OpenOptions};
use std::io::{BufReader, ErrorKind, Read, Write};
use std::path::{Path, PathBuf};

use crate::event::JournalEvent;

pub const SNAPSHOT_MAGIC: &[u8; 5] = b"CTEJ1";

/// Record payloads are JSON of bounded events; anything near this limit is
/// framing corruption, not data.
const MAX_RECORD_LEN: u32 = 64 * 1024 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum JournalError {
    #[error("journal I/O on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("journal corrupt at seq {seq}: {detail}")]
    Corrupt { seq: u64, detail: String },
    #[error("snapshot invalid: {0}")]
    Snapshot(String),
}

impl JournalError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        JournalError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Append-side handle. Writes are synced to disk before `append` returns.
pub struct Journal {
    file: File,
    path: PathBuf,
}

impl Journal {
    /// Opens (creating if absent) for appending.
    pub fn open(path: &Path) -> Result<Self, JournalError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .read(true)
            .open(path)
            .map_err(|e| JournalError::io(path, e))?;
        Ok(Journal {
            file,
            path: path.to_path_buf(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends one event, durable before return.
    pub fn append(&mut self, event: &JournalEvent) -> Result<(), JournalError> {
        let payload = serde_json::to_vec(event)
            .map_err(|e| JournalError::Snapshot(format!("encode: {e}")))?;
        let mut record = Vec::with_capacity(payload.len() + 8);
        record.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        record.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
        record.extend_from_slice(&payload);
        self.file
            .write_all(&record)
            .and_then(|_| self.file.sync_data())
            .map_err(|e| JournalError::io(&self.path, e))?;
        Ok(())
    }
}

/// Reads every event from a journal file. A missing file is an empty
/// journal. Any framing damage (torn length header, short payload, checksum
/// mismatch, undecodable JSON) is reported as corruption naming the seq the
/// damaged record would have carried. The journal always starts at seq 1;
/// snapshot recovery skips already-covered events after reading.
pub fn read_all(path: &Path) -> Result<Vec<JournalEvent>, JournalError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(JournalError::io(path, e)),
    };
    let mut reader = BufReader::new(file);
    let mut events = Vec::new();
    let mut next_seq: u64 = 1;
    loop {
        match read_record(&mut reader, next_seq)? {
            None => break,
            Some(payload) => {
                let event: JournalEvent = serde_json::from_slice(&payload).map_err(|e| {
                    JournalError::Corrupt {
                        seq: next_seq,
                        detail: format!("payload does not decode: {e}"),
                    }
                })?;
                if event.seq != next_seq {
                    return Err(JournalError::Corrupt {
                        seq: next_seq,
                        detail: format!("record carries seq {}", event.seq),
                    });
                }
                events.push(event);
                next_seq += 1;
            }
        }
    }
    Ok(events)
}

/// Reads one CRC-framed record; None on clean EOF.
fn read_record<R: Read>(reader: &mut R, seq: u64) -> Result<Option<Vec<u8>>, JournalError> {
    let mut header = [0u8; 8];
    match read_exact_or_eof(reader, &mut header) {
        Ok(0) => return Ok(None),
        Ok(8) => {}
        Ok(n) => {
            return Err(JournalError::Corrupt {
                seq,
                detail: format!("torn record header ({n} of 8 bytes)"),
            })
        }
        Err(e) => {
            return Err(JournalError::Corrupt {
                seq,
                detail: format!("read: {e}"),
            })
        }
    }
    let len = u32::from_le_bytes(header[0..4].try_into().unwrap());
    let crc = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if len > MAX_RECORD_LEN {
        return Err(JournalError::Corrupt {
            seq,
            detail: format!("implausible record length {len}"),
        });
    }
    let mut payload = vec![0u8; len as usize];
    match read_exact_or_eof(reader, &mut payload) {
        Ok(n) if n == payload.len() => {}
        Ok(n) => {
            return Err(JournalError::Corrupt {
                seq,
                detail: format!("torn payload ({n} of {len} bytes)"),
            })
        }
        Err(e) => {
            return Err(JournalError::Corrupt {
                seq,
                detail: format!("read: {e}"),
            })
        }
    }
    let actual = crc32fast::hash(&payload);
    if actual != crc {
        return Err(JournalError::Corrupt {
            seq,
            detail: format!("checksum mismatch (stored {crc:08x}, computed {actual:08x})"),
        });
    }
    Ok(Some(payload))
}

/// Reads as many bytes as available up to buf.len(); returns the count
/// (0 = clean EOF at a record boundary).
fn read_exact_or_eof<R: Read>(reader: &mut R, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Writes a snapshot atomically (temp file + rename).
pub fn write_snapshot<S: serde::Serialize>(
    path: &Path,
    covered_seq: u64,
    state: &S,
) -> Result<(), JournalError> {
    let payload = serde_json::to_vec(state)
        .map_err(|e| JournalError::Snapshot(format!("encode: {e}")))?;
    let mut bytes = Vec::with_capacity(payload.len() + 21);
    bytes.extend_from_slice(SNAPSHOT_MAGIC);
    bytes.extend_from_slice(&covered_seq.to_le_bytes());
    bytes.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    bytes.extend_from_slice(&payload);

    let tmp = path.with_extension("tmp");
    let mut file = File::create(&tmp).map_err(|e| JournalError::io(&tmp, e))?;
    file.write_all(&bytes)
        .and_then(|_| file.sync_data())
        .map_err(|e| JournalError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| JournalError::io(path, e))?;
    Ok(())
}

/// Loads a snapshot; Ok(None) when the file does not exist.
pub fn read_snapshot<S: serde::de::DeserializeOwned>(
    path: &Path,
) -> Result<Option<(u64, S)>, JournalError> {
    let mut file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(JournalError::io(path, e)),
    };
    let mut magic = [0u8; 5];
    file.read_exact(&mut magic)
        .map_err(|e| JournalError::Snapshot(format!("magic: {e}")))?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(JournalError::Snapshot(format!(
            "bad magic {:?}",
            String::from_utf8_lossy(&magic)
        )));
    }
    let mut seq_bytes = [0u8; 8];
    file.read_exact(&mut seq_bytes)
        .map_err(|e| JournalError::Snapshot(format!("covered seq: {e}")))?;
    let covered_seq = u64::from_le_bytes(seq_bytes);
    let mut reader = BufReader::new(&mut file);
    let payload = read_record(&mut reader, covered_seq)?
        .ok_or_else(|| JournalError::Snapshot("missing state record".to_string()))?;
    // Nothing may follow the state record.
    let mut rest = [0u8; 1];
    if reader.read(&mut rest).map_err(|e| JournalError::Snapshot(e.to_string()))? != 0 {
        return Err(JournalError::Snapshot("trailing bytes".to_string()));
    }
    let state = serde_json::from_slice(&payload)
        .map_err(|e| JournalError::Snapshot(format!("state does not decode: {e}")))?;
    Ok(Some((covered_seq, state)))
}

/// Truncates the journal file to `len` bytes. Test support for corruption
/// scenarios; the production path never truncates.
pub fn truncate_for_test(path: &Path, len: u64) -> Result<(), JournalError> {
    let file = OpenOptions::new()
        .write(true)
        .open(path)
        .map_err(|e| JournalError::io(path, e))?;
    file.set_len(len).map_err(|e| JournalError::io(path, e))?;
    file.sync_data().map_err(|e| JournalError::io(path, e))?;
    Ok(())
}
