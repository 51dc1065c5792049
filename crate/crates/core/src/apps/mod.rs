//! End-to-end pipelines for the two worked applications, plus the CSV
//! plumbing they share.

pub mod cricket;
pub mod mortality;

use std::io::Read;
use std::str::FromStr;

use csv::StringRecord;

use crate::error::{Error, Result};

/// Header-addressed CSV rows, each tagged with its 1-based line number.
pub(crate) struct Table {
    pub columns: Vec<usize>,
    pub rows: Vec<(u64, StringRecord)>,
}

/// Reads a headed CSV and locates `required` columns (case-insensitive).
pub(crate) fn read_table<R: Read>(reader: R, required: &[&str]) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut columns = Vec::with_capacity(required.len());
    for name in required {
        let idx = headers
            .iter()
            .position(|h| h.trim_start_matches('\u{feff}').eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::MalformedRow {
                line: 1,
                reason: format!("header has no `{name}` column (found: {})", headers.iter().collect::<Vec<_>>().join(", ")),
            })?;
        columns.push(idx);
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::MalformedRow {
                line,
                reason: e.to_string(),
            }
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        rows.push((line, rec));
    }
    Ok(Table { columns, rows })
}

pub(crate) fn field<'a>(rec: &'a StringRecord, idx: usize, line: u64, name: &str) -> Result<&'a str> {
    match rec.get(idx) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(Error::MalformedRow {
            line,
            reason: format!("missing value for `{name}`"),
        }),
    }
}

pub(crate) fn parse_field<T: FromStr>(rec: &StringRecord, idx: usize, line: u64, name: &str) -> Result<T> {
    let raw = field(rec, idx, line, name)?;
    raw.parse().map_err(|_| Error::MalformedRow {
        line,
        reason: format!("cannot parse `{raw}` as {name}"),
    })
}
