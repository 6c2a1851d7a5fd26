//! Append-only, line-delimited JSON event log.
//!
//! Each line is one [`LogRecord`] wrapped with a sequence number starting at
//! zero. A line that fails to parse, or whose sequence number is out of
//! order, ends the valid prefix; everything after it is ignored on replay.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Submission, Task, Timestamp, Verdict};

pub const LOG_FILE: &str = "events.log";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    TaskCreated {
        task: Task,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        warnings: Vec<String>,
    },
    SubmissionJudged {
        task_id: String,
        submission: Submission,
        verdict: Verdict,
    },
    TaskClosed {
        task_id: String,
        closed_at: Timestamp,
    },
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    seq: u64,
    #[serde(flatten)]
    record: LogRecord,
}

/// Where the valid prefix of a damaged log ends.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    /// 1-based line number of the first invalid record.
    pub line: usize,
    /// Byte offset at which the invalid record starts.
    pub byte_offset: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LogContents {
    pub records: Vec<LogRecord>,
    /// Length in bytes of the valid prefix.
    pub valid_len: u64,
    pub truncation: Option<Truncation>,
}

/// Reads the valid prefix of the log in `dir`. A missing log is empty.
pub fn read_log(dir: &Path) -> Result<LogContents, StoreError> {
    let path = dir.join(LOG_FILE);
    let file = match File::open(&path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(LogContents::default()),
        Err(source) => return Err(StoreError::Io { path, source }),
    };
    let mut reader = BufReader::new(file);
    let mut contents = LogContents::default();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader
            .read_until(b'\n', &mut buf)
            .map_err(|source| StoreError::Io {
                path: path.clone(),
                source,
            })?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let fail = |reason: String| Truncation {
            line: line_no,
            byte_offset: contents.valid_len,
            reason,
        };
        if buf.last() != Some(&b'\n') {
            contents.truncation = Some(fail("incomplete final record".into()));
            break;
        }
        let envelope: Envelope = match serde_json::from_slice(&buf) {
            Ok(e) => e,
            Err(e) => {
                contents.truncation = Some(fail(format!("unparseable record: {e}")));
                break;
            }
        };
        let expected = contents.records.len() as u64;
        if envelope.seq != expected {
            contents.truncation = Some(fail(format!(
                "sequence {} where {expected} expected",
                envelope.seq
            )));
            break;
        }
        contents.records.push(envelope.record);
        contents.valid_len += n as u64;
    }
    Ok(contents)
}

/// Writable handle on the log. Every append is flushed and synced before it
/// returns.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
    next_seq: u64,
}

impl EventLog {
    /// Opens (creating if needed) the log in `dir`, cutting off any damaged
    /// tail so that new records follow the last valid one.
    pub fn open(dir: &Path) -> Result<(Self, LogContents), StoreError> {
        fs::create_dir_all(dir).map_err(|source| StoreError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let contents = read_log(dir)?;
        let path = dir.join(LOG_FILE);
        let io_err = |source| StoreError::Io {
            path: path.clone(),
            source,
        };
        let file = OpenOptions::new()
            .create(true)
            .read(true)
            .write(true)
            .truncate(false)
            .open(&path)
            .map_err(io_err)?;
        if contents.truncation.is_some() {
            file.set_len(contents.valid_len).map_err(io_err)?;
            file.sync_all().map_err(io_err)?;
        }
        let mut file = file;
        io::Seek::seek(&mut file, io::SeekFrom::End(0)).map_err(io_err)?;
        let log = Self {
            path: path.clone(),
            file,
            next_seq: contents.records.len() as u64,
        };
        Ok((log, contents))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> u64 {
        self.next_seq
    }

    pub fn is_empty(&self) -> bool {
        self.next_seq == 0
    }

    pub fn append(&mut self, record: &LogRecord) -> Result<(), StoreError> {
        let envelope = Envelope {
            seq: self.next_seq,
            record: record.clone(),
        };
        let mut line = serde_json::to_vec(&envelope).expect("log record serializes");
        line.push(b'\n');
        let io_err = |source| StoreError::Io {
            path: self.path.clone(),
            source,
        };
        self.file.write_all(&line).map_err(io_err)?;
        self.file.sync_data().map_err(io_err)?;
        self.next_seq += 1;
        Ok(())
    }
}
