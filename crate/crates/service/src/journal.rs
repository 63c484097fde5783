//! Append-only JSON-lines journal.

use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::error::ServiceError;
use crate::state::Record;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Durability {
    /// `fsync` after every record.
    #[default]
    Sync,
    /// Flush to the OS only.
    Flush,
}

#[derive(Debug)]
pub struct Journal {
    file: File,
    path: PathBuf,
    durability: Durability,
    records: usize,
}

impl Journal {
    /// Opens (or creates) a journal and returns it with its records. A
    /// trailing line without a newline or that fails to parse is a torn
    /// write: it is dropped and the file truncated to the last full record.
    pub fn open(
        path: impl AsRef<Path>,
        durability: Durability,
    ) -> Result<(Self, Vec<Record>), ServiceError> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;

        let mut records = Vec::new();
        let mut good_len = 0;
        let mut start = 0;
        let mut line_no = 0;
        while start < bytes.len() {
            line_no += 1;
            let end = bytes[start..]
                .iter()
                .position(|&b| b == b'\n')
                .map(|i| start + i);
            let line = &bytes[start..end.unwrap_or(bytes.len())];
            let parsed = std::str::from_utf8(line)
                .map_err(|e| e.to_string())
                .and_then(|s| serde_json::from_str::<Record>(s).map_err(|e| e.to_string()));
            match (parsed, end) {
                (Ok(r), Some(e)) => {
                    records.push(r);
                    good_len = e + 1;
                    start = e + 1;
                }
                (_, None) => break,
                (Err(_), Some(e)) if e + 1 == bytes.len() => break,
                (Err(message), Some(_)) => {
                    return Err(ServiceError::CorruptJournal {
                        line: line_no,
                        message,
                    })
                }
            }
        }
        if good_len < bytes.len() {
            file.set_len(good_len as u64)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::End(0))?;
        let n = records.len();
        Ok((
            Self {
                file,
                path,
                durability,
                records: n,
            },
            records,
        ))
    }

    /// Writes one record; returns after it is durable per the policy.
    pub fn append(&mut self, record: &Record) -> Result<(), ServiceError> {
        let mut line = serde_json::to_vec(record).map_err(|e| ServiceError::Io(e.into()))?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()?;
        if self.durability == Durability::Sync {
            self.file.sync_data()?;
        }
        self.records += 1;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records == 0
    }
}
