//! Event log: an 8-byte magic followed by frames of `u32` little-endian
//! length plus one JSON-encoded event.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{KgError, Result, UpsertEvent};

const MAGIC: &[u8; 8] = b"FSEGWAL1";

pub struct EventLog {
    out: BufWriter<File>,
}

impl EventLog {
    /// Opens `path` for appending, writing the header if the file is new.
    pub fn append_to(path: &Path) -> Result<Self> {
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        if file.metadata()?.len() == 0 {
            file.write_all(MAGIC)?;
        }
        Ok(Self { out: BufWriter::new(file) })
    }

    pub fn append(&mut self, event: &UpsertEvent) -> Result<()> {
        let body = serde_json::to_vec(event)?;
        let len = u32::try_from(body.len()).map_err(|_| KgError::Malformed {
            key: event.key.clone(),
            message: "event larger than 4 GiB".into(),
        })?;
        self.out.write_all(&len.to_le_bytes())?;
        self.out.write_all(&body)?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn write_event_log(path: &Path, events: &[UpsertEvent]) -> Result<()> {
    if path.exists() {
        std::fs::remove_file(path)?;
    }
    let mut log = EventLog::append_to(path)?;
    events.iter().try_for_each(|e| log.append(e))
}

/// Reads a framed log. A truncated final frame (an interrupted append) is
/// dropped with a warning; a frame that is not valid JSON is an error.
pub fn read_event_log(path: &Path) -> Result<Vec<UpsertEvent>> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if !bytes.starts_with(MAGIC) {
        return Err(KgError::BadFrame { frame: 0, message: "not an event log".into() });
    }
    let mut rest = &bytes[MAGIC.len()..];
    let mut events = Vec::new();
    while !rest.is_empty() {
        let frame = events.len() + 1;
        if rest.len() < 4 {
            log::warn!("event log: truncated length at frame {frame}");
            break;
        }
        let len = u32::from_le_bytes(rest[..4].try_into().expect("4 bytes")) as usize;
        if rest.len() < 4 + len {
            log::warn!("event log: truncated body at frame {frame}");
            break;
        }
        let event = serde_json::from_slice(&rest[4..4 + len])
            .map_err(|e| KgError::BadFrame { frame, message: e.to_string() })?;
        events.push(event);
        rest = &rest[4 + len..];
    }
    Ok(events)
}

/// One event per line; blank lines are skipped.
pub fn read_events_jsonl<R: Read>(reader: R) -> Result<Vec<UpsertEvent>> {
    let mut events = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line).map_err(|e| KgError::BadLine { line: i + 1, message: e.to_string() })?;
        events.push(event);
    }
    Ok(events)
}

/// Reads either a framed log or a JSONL file, by header.
pub fn read_events_any(path: &Path) -> Result<Vec<UpsertEvent>> {
    let mut head = [0u8; 8];
    let n = File::open(path)?.read(&mut head)?;
    if n == head.len() && &head == MAGIC {
        read_event_log(path)
    } else {
        read_events_jsonl(File::open(path)?)
    }
}
