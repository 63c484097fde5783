//! JSON-lines and CSV helpers for the file formats exchanged between stages.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scoring::IntensityScore;
use crate::PostId;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Parses one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned, R: Read>(reader: R) -> Result<Vec<T>, IoError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|source| IoError::Json {
            line: i + 1,
            source,
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn read_jsonl_file<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, IoError> {
    read_jsonl(File::open(path)?)
}

pub fn write_jsonl<T: Serialize, W: Write>(writer: W, items: &[T]) -> Result<(), IoError> {
    let mut w = BufWriter::new(writer);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|source| IoError::Json { line: 0, source })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_jsonl_file<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<(), IoError> {
    write_jsonl(File::create(path)?, items)
}

pub fn write_json_file<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|source| IoError::Json { line: 0, source })?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct ScoreRow {
    post_id: PostId,
    score: f64,
    n_appearances: u32,
    n_best: u32,
    n_worst: u32,
}

/// Writes scores as CSV with header `post_id,score,n_appearances,n_best,n_worst`.
pub fn write_scores_csv<W: Write>(writer: W, scores: &[IntensityScore]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    for s in scores {
        w.serialize(ScoreRow {
            post_id: s.post_id,
            score: s.score,
            n_appearances: s.n_appearances,
            n_best: s.n_best,
            n_worst: s.n_worst,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scores_csv<R: Read>(reader: R) -> Result<Vec<IntensityScore>, IoError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in r.deserialize() {
        let row: ScoreRow = row?;
        out.push(IntensityScore {
            post_id: row.post_id,
            score: row.score,
            n_appearances: row.n_appearances,
            n_best: row.n_best,
            n_worst: row.n_worst,
        });
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct IntensityRow {
    post_id: PostId,
    score: f64,
}

/// Reads a `post_id,score[,...]` CSV into a map. Extra columns are ignored, so
/// both annotated score files and baseline prediction files are accepted.
pub fn read_intensities_csv<R: Read>(
    reader: R,
) -> Result<std::collections::HashMap<PostId, f64>, IoError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = std::collections::HashMap::new();
    for row in r.deserialize() {
        let row: IntensityRow = row?;
        out.insert(row.post_id, row.score);
    }
    Ok(out)
}
