//! Append-only JSON-lines logs: `channels.log` holds one channel record per
//! line, `channel-<id>.log` one entry per line. A record is durable once its
//! terminating newline is written; a trailing partial or unparseable line is
//! a torn write and is cut off on recovery.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::store::StoreError;

/// How hard an append pushes data towards the disk before returning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SyncMode {
    /// Hand the bytes to the OS; survives a process crash.
    #[default]
    Flush,
    /// Also `fsync` the data; survives power loss.
    Fsync,
}

pub fn metadata_path(dir: &Path) -> PathBuf {
    dir.join("channels.log")
}

pub fn channel_log_path(dir: &Path, id: u64) -> PathBuf {
    dir.join(format!("channel-{id}.log"))
}

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug)]
pub struct AppendLog {
    path: PathBuf,
    file: File,
    sync: SyncMode,
}

impl AppendLog {
    pub fn open(path: &Path, sync: SyncMode) -> Result<Self, StoreError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_error(path))?;
        Ok(AppendLog {
            path: path.to_path_buf(),
            file,
            sync,
        })
    }

    /// Writes one record as a single newline-terminated line.
    pub fn append<T: Serialize>(&mut self, record: &T) -> Result<(), StoreError> {
        let mut line = serde_json::to_vec(record).map_err(|e| StoreError::Corrupt {
            path: self.path.clone(),
            line: 0,
            reason: e.to_string(),
        })?;
        line.push(b'\n');
        self.file.write_all(&line).map_err(io_error(&self.path))?;
        self.file.flush().map_err(io_error(&self.path))?;
        if self.sync == SyncMode::Fsync {
            self.file.sync_data().map_err(io_error(&self.path))?;
        }
        Ok(())
    }
}

/// Reads every complete record. A torn last record is truncated away with a
/// warning; a bad record followed by good ones is corruption.
pub fn replay<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_error(path)(e)),
    };

    let mut records = Vec::new();
    let mut offset = 0usize;
    let mut line_no = 0usize;
    while offset < bytes.len() {
        line_no += 1;
        let rest = &bytes[offset..];
        let (line, complete) = match rest.iter().position(|&b| b == b'\n') {
            Some(i) => (&rest[..i], true),
            None => (rest, false),
        };
        let next = offset + line.len() + usize::from(complete);
        let is_last = next >= bytes.len();
        let parsed = if complete {
            serde_json::from_slice::<T>(line).ok()
        } else {
            None
        };
        match parsed {
            Some(record) => records.push(record),
            None if is_last => {
                log::warn!(
                    "{}: dropping torn record on line {line_no} ({} bytes)",
                    path.display(),
                    bytes.len() - offset
                );
                truncate(path, offset as u64)?;
                break;
            }
            None => {
                return Err(StoreError::Corrupt {
                    path: path.to_path_buf(),
                    line: line_no,
                    reason: "unparseable record before end of log".into(),
                })
            }
        }
        offset = next;
    }
    Ok(records)
}

fn truncate(path: &Path, len: u64) -> Result<(), StoreError> {
    let file = OpenOptions::new()
        .write(true)
        .open(path)
        .map_err(io_error(path))?;
    file.set_len(len).map_err(io_error(path))?;
    file.sync_all().map_err(io_error(path))
}
