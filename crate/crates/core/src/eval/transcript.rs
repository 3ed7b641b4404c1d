//! Append-only JSONL logs.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("transcript io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record at {path}:{line}: {source}")]
    Malformed {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Encode(#[from] serde_json::Error),
}

/// Line-delimited log of `T`. One writer per file.
#[derive(Debug)]
pub struct TranscriptLog<T> {
    path: PathBuf,
    _record: PhantomData<fn() -> T>,
}

impl<T: Serialize + DeserializeOwned> TranscriptLog<T> {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        TranscriptLog {
            path: path.into(),
            _record: PhantomData,
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn io(&self, source: std::io::Error) -> TranscriptError {
        TranscriptError::Io {
            path: self.path.clone(),
            source,
        }
    }

    /// Appends one record as a single line and flushes it.
    pub fn append(&self, record: &T) -> Result<(), TranscriptError> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| self.io(e))?;
        file.write_all(&line).map_err(|e| self.io(e))?;
        file.flush().map_err(|e| self.io(e))
    }

    /// Reads every complete record. A final line cut short by a crash is
    /// skipped with a warning; malformed lines elsewhere are errors.
    pub fn scan(&self) -> Result<impl Iterator<Item = Result<T, TranscriptError>>, TranscriptError> {
        let file = File::open(&self.path).map_err(|e| self.io(e))?;
        let mut lines = Vec::new();
        let mut reader = BufReader::new(file);
        loop {
            let mut buf = String::new();
            let read = reader.read_line(&mut buf).map_err(|e| self.io(e))?;
            if read == 0 {
                break;
            }
            lines.push(buf);
        }
        let path = self.path.clone();
        let last = lines.len();
        Ok(lines
            .into_iter()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .filter_map(move |(i, line)| match serde_json::from_str::<T>(line.trim_end_matches(['\n', '\r'])) {
                Ok(rec) => Some(Ok(rec)),
                Err(e) if i + 1 == last && !line.ends_with('\n') => {
                    log::warn!("{}:{}: skipping truncated final line ({e})", path.display(), i + 1);
                    None
                }
                Err(source) => Some(Err(TranscriptError::Malformed {
                    path: path.clone(),
                    line: i + 1,
                    source,
                })),
            }))
    }

    pub fn read_all(&self) -> Result<Vec<T>, TranscriptError> {
        self.scan()?.collect()
    }
}
