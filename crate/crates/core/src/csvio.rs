//! Fixed-header CSV tables.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub(crate) fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn read_rows<T: DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let found = r.headers().map_err(|e| Error::parse(path, 1, e.to_string()))?;
    if found.iter().map(str::trim).ne(header.iter().copied()) {
        return Err(Error::parse(
            path,
            1,
            format!("expected header `{}`, found `{}`", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut rows = Vec::new();
    for (k, record) in r.deserialize().enumerate() {
        let row: T = record.map_err(|e| {
            let line = e.position().map_or(k as u64 + 2, |p| p.line());
            Error::parse(path, line as usize, e.to_string())
        })?;
        rows.push(row);
    }
    Ok(rows)
}
