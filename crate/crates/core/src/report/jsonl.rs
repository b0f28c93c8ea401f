use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Header tag of run-record files.
pub const RUN_SCHEMA: &str = "tlnas-run-v1";
/// Header tag of study-record files.
pub const STUDY_SCHEMA: &str = "tlnas-study-v1";

#[derive(Serialize, Deserialize)]
struct Header {
    schema: String,
}

/// A header line `{"schema": ...}` followed by one record per line.
pub fn write_jsonl<T: Serialize>(records: &[T], schema: &str, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let header = Header { schema: schema.into() };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Inverse of [`write_jsonl`]. The header must carry `schema`.
pub fn read_jsonl<T: DeserializeOwned>(schema: &str, path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::format(path, "line 1: missing schema header"))?
        .map_err(|e| Error::io(path, e))?;
    let header: Header =
        serde_json::from_str(&first).map_err(|e| Error::format(path, format!("line 1: {e}")))?;
    if header.schema != schema {
        return Err(Error::format(
            path,
            format!("line 1: schema {} where {schema} was expected", header.schema),
        ));
    }
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::format(path, format!("line {}: {e}", n + 2)))?);
    }
    Ok(out)
}
