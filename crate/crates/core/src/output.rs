//! Record emission.
//!
//! CSV: zero or more `# key=value` provenance lines, then a header row
//! naming every column, then one record per row. Empty cells stand for
//! absent optional values. JSON: a single array of record objects, with
//! absent values as `null`.
//!
//! Floats are written in shortest round-trip form, so identical inputs
//! give byte-identical files.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{invalid, Error};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(invalid(format!("unknown output format {other:?}"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

/// Ordered `key=value` pairs describing how a file was produced.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Provenance(pub Vec<(String, String)>);

impl Provenance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl fmt::Display) -> &mut Self {
        self.0.push((key.to_string(), value.to_string()));
        self
    }

    pub fn write_comments<W: Write>(&self, mut w: W) -> io::Result<()> {
        for (k, v) in &self.0 {
            writeln!(w, "# {k}={v}")?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.0
                .iter()
                .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
                .collect(),
        )
    }
}

pub fn write_csv<T: Serialize, W: Write>(mut w: W, records: &[T], provenance: &Provenance) -> io::Result<()> {
    provenance.write_comments(&mut w)?;
    let mut csv = csv::Writer::from_writer(w);
    for r in records {
        csv.serialize(r)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize, W: Write>(mut w: W, records: &[T]) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut w, records)?;
    writeln!(w)?;
    Ok(())
}

pub fn write_records<T: Serialize, W: Write>(
    w: W,
    records: &[T],
    format: Format,
    provenance: &Provenance,
) -> io::Result<()> {
    match format {
        Format::Csv => write_csv(w, records, provenance),
        Format::Json => write_json(w, records),
    }
}
