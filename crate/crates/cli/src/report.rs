//! Tabular report rendering. Every table carries the tool version and the
//! config hash; rows are emitted in the order the command built them.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::ser::{Serialize, SerializeStruct, Serializer};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
    Missing,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:.6}"),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Int(v) => s.serialize_u64(*v),
            Cell::Float(v) => s.serialize_f64(*v),
            Cell::Text(t) => s.serialize_str(t),
            Cell::Missing => s.serialize_none(),
        }
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Cell {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Cell {
        Cell::Int(v as u64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Cell {
        Cell::Int(v.into())
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Cell {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Cell {
        v.map_or(Cell::Missing, Cell::Float)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Cell {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Cell {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&'static str]) -> Table {
        Table { name: name.into(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format, config_hash: &str) -> String {
        match format {
            Format::Csv => self.to_csv(config_hash),
            Format::Json => self.to_json(config_hash),
        }
    }

    pub fn to_csv(&self, config_hash: &str) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv)).expect("in-memory write");
        }
        let body = String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8");
        format!("# hsp {TOOL_VERSION} report={} schema={SCHEMA_VERSION} config={config_hash}\n{body}", self.name)
    }

    pub fn to_json(&self, config_hash: &str) -> String {
        let mut s = serde_json::to_string_pretty(&Feed { table: self, config_hash }).expect("serializable");
        s.push('\n');
        s
    }
}

struct Feed<'a> {
    table: &'a Table,
    config_hash: &'a str,
}

impl Serialize for Feed<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Feed", 6)?;
        st.serialize_field("schema_version", &SCHEMA_VERSION)?;
        st.serialize_field("report", &self.table.name)?;
        st.serialize_field("tool_version", TOOL_VERSION)?;
        st.serialize_field("config_hash", self.config_hash)?;
        st.serialize_field("columns", &self.table.columns)?;
        st.serialize_field("rows", &self.table.rows)?;
        st.end()
    }
}

/// Writes each table to `<dir>/<prefix><name>.<ext>`, or to stdout when
/// no directory is given.
pub fn emit(tables: &[Table], format: Format, config_hash: &str, dir: Option<&Path>, prefix: &str) -> Result<(), CliError> {
    match dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| CliError::input(dir.display(), e))?;
            for t in tables {
                let path = dir.join(format!("{prefix}{}.{}", t.name, format.extension()));
                fs::write(&path, t.render(format, config_hash)).map_err(|e| CliError::input(path.display(), e))?;
            }
        }
        None => {
            let mut out = std::io::stdout().lock();
            for (i, t) in tables.iter().enumerate() {
                if i > 0 {
                    let _ = writeln!(out);
                }
                let _ = out.write_all(t.render(format, config_hash).as_bytes());
            }
        }
    }
    Ok(())
}
