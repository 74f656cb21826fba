//! Column tables and their CSV / JSON encodings.
//!
//! Numbers are written with 12 significant digits so that identical runs
//! give identical bytes.

use std::io::Write;

use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub enum ColumnData {
    Num(Vec<f64>),
    Text(Vec<String>),
}

#[derive(Debug, Clone)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

#[derive(Debug, Clone)]
pub struct Table {
    pub command: &'static str,
    pub metadata: Map<String, Value>,
    pub columns: Vec<Column>,
    /// Number of data rows; zero gives a header-only CSV.
    pub rows: usize,
}

pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        format!("{x}")
    }
}

/// `x` rounded to 12 significant digits, `null` when not finite.
pub fn json_num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let rounded: f64 = fmt_num(x).parse().expect("formatted float parses");
    serde_json::Number::from_f64(rounded).map_or(Value::Null, Value::Number)
}

impl Table {
    pub fn new(command: &'static str, rows: usize) -> Self {
        Self {
            command,
            metadata: Map::new(),
            columns: Vec::new(),
            rows,
        }
    }

    pub fn meta(&mut self, key: &str, value: Value) {
        self.metadata.insert(key.to_string(), value);
    }

    pub fn meta_num(&mut self, key: &str, value: f64) {
        self.meta(key, json_num(value));
    }

    pub fn num(&mut self, name: impl Into<String>, values: Vec<f64>) {
        debug_assert_eq!(values.len(), self.rows);
        self.columns.push(Column {
            name: name.into(),
            data: ColumnData::Num(values),
        });
    }

    pub fn text(&mut self, name: impl Into<String>, values: Vec<String>) {
        debug_assert_eq!(values.len(), self.rows);
        self.columns.push(Column {
            name: name.into(),
            data: ColumnData::Text(values),
        });
    }

    pub fn write<W: Write>(&self, format: Format, out: W) -> CliResult<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out),
        }
    }

    fn write_csv<W: Write>(&self, out: W) -> CliResult<()> {
        let io = |e: csv::Error| CliError::input(format!("cannot write output: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))
            .map_err(io)?;
        for r in 0..self.rows {
            let row: Vec<String> = self
                .columns
                .iter()
                .map(|c| match &c.data {
                    ColumnData::Num(v) => fmt_num(v[r]),
                    ColumnData::Text(v) => v[r].clone(),
                })
                .collect();
            w.write_record(&row).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let mut columns = Map::new();
        for c in &self.columns {
            let v = match &c.data {
                ColumnData::Num(v) => Value::Array(v.iter().map(|&x| json_num(x)).collect()),
                ColumnData::Text(v) => Value::Array(v.iter().cloned().map(Value::String).collect()),
            };
            columns.insert(c.name.clone(), v);
        }
        let mut root = Map::new();
        root.insert("command".into(), Value::String(self.command.into()));
        root.insert("metadata".into(), Value::Object(self.metadata.clone()));
        root.insert("columns".into(), Value::Object(columns));
        Value::Object(root)
    }

    fn write_json<W: Write>(&self, mut out: W) -> CliResult<()> {
        serde_json::to_writer_pretty(&mut out, &self.to_json())
            .map_err(|e| CliError::input(format!("cannot write output: {e}")))?;
        writeln!(out)?;
        Ok(())
    }
}
