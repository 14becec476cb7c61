//! JSON and CSV rendering. Every float is written with 17 significant
//! digits so that re-reading an artifact reproduces the exact values.

use std::io;

use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::{Map, Value};

/// Write a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Clone, Copy, Default)]
struct Digits17;

impl Formatter for Digits17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Pretty-free JSON with 17-digit floats and a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17);
    value.serialize(&mut ser).expect("serializing to memory cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON output is UTF-8")
}

/// Table cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => fmt_f64(*v),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory CSV");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("in-memory CSV");
        }
        String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("CSV output is UTF-8")
    }
}

/// Result of one command: a JSON summary and an optional table.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub summary: Map<String, Value>,
    pub table: Option<Table>,
}

impl Output {
    pub fn new(summary: impl Serialize) -> Self {
        let summary = match serde_json::to_value(summary).expect("summary serializes") {
            Value::Object(m) => m,
            other => {
                let mut m = Map::new();
                m.insert("result".into(), other);
                m
            }
        };
        Self { summary, table: None }
    }

    pub fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }

    pub fn insert(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(key.into(), serde_json::to_value(value).expect("value serializes"));
    }

    /// Summary with the table embedded under `table`.
    pub fn json(&self) -> String {
        let mut doc = self.summary.clone();
        if let Some(t) = &self.table {
            doc.insert("table".into(), serde_json::to_value(t).expect("table serializes"));
        }
        to_json(&doc)
    }

    pub fn summary_json(&self) -> String {
        to_json(&self.summary)
    }

    /// The table, or the flattened summary as a one-row table.
    pub fn csv(&self) -> String {
        match &self.table {
            Some(t) => t.to_csv(),
            None => flatten(&self.summary).to_csv(),
        }
    }
}

fn flatten(map: &Map<String, Value>) -> Table {
    fn walk(prefix: &str, v: &Value, cols: &mut Vec<String>, cells: &mut Vec<Cell>) {
        match v {
            Value::Object(m) => {
                for (k, v) in m {
                    walk(&join(prefix, k), v, cols, cells);
                }
            }
            Value::Array(a) => {
                for (i, v) in a.iter().enumerate() {
                    walk(&join(prefix, &i.to_string()), v, cols, cells);
                }
            }
            Value::Null => {
                cols.push(prefix.into());
                cells.push(Cell::Text(String::new()));
            }
            Value::Bool(b) => {
                cols.push(prefix.into());
                cells.push(Cell::Bool(*b));
            }
            Value::Number(n) => {
                cols.push(prefix.into());
                cells.push(match n.as_i64() {
                    Some(i) => Cell::Int(i),
                    None => Cell::Float(n.as_f64().unwrap_or(f64::NAN)),
                });
            }
            Value::String(s) => {
                cols.push(prefix.into());
                cells.push(Cell::Text(s.clone()));
            }
        }
    }
    fn join(prefix: &str, key: &str) -> String {
        if prefix.is_empty() {
            key.into()
        } else {
            format!("{prefix}.{key}")
        }
    }
    let mut cols = Vec::new();
    let mut cells = Vec::new();
    for (k, v) in map {
        walk(k, v, &mut cols, &mut cells);
    }
    Table { columns: cols, rows: vec![cells] }
}
