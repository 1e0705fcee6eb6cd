//! Minimal comma-separated table reading shared by the artifact readers.
//! Fields never contain commas or quotes in any format this crate writes.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) struct Table {
    pub header: Vec<String>,
    /// (1-based line number, fields)
    pub rows: Vec<(usize, Vec<String>)>,
}

pub(crate) fn read_table(path: &Path) -> Result<Table> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let header = match lines.next() {
        Some((_, h)) => h.split(',').map(|s| s.trim().to_string()).collect(),
        None => return Err(parse_error(path, 1, "empty file")),
    };
    let rows = lines
        .map(|(i, l)| (i + 1, l.split(',').map(|s| s.trim().to_string()).collect()))
        .collect();
    Ok(Table { header, rows })
}

pub(crate) fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub(crate) fn expect_header(path: &Path, table: &Table, expected: &[String]) -> Result<()> {
    if table.header != expected {
        return Err(parse_error(
            path,
            1,
            format!("unexpected header, want {}", expected.join(",")),
        ));
    }
    Ok(())
}

pub(crate) fn field<T: std::str::FromStr>(path: &Path, line: usize, raw: &str) -> Result<T> {
    raw.parse::<T>()
        .map_err(|_| parse_error(path, line, format!("cannot parse {raw:?}")))
}

pub(crate) fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}
