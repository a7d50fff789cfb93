//! Typed result tables, written as CSV with a commented header plus a JSON
//! metadata file.
//!
//! The CSV layout is gnuplot-friendly: `#` lines are comments, the first
//! uncommented line names the columns, and every following line is a row.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Real,
    Integer,
    Text,
}

impl ColumnKind {
    fn as_str(self) -> &'static str {
        match self {
            Self::Real => "real",
            Self::Integer => "integer",
            Self::Text => "text",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "real" => Some(Self::Real),
            "integer" => Some(Self::Integer),
            "text" => Some(Self::Text),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    /// Free-form unit or meaning, written into the header comment.
    pub unit: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Real(f64),
    Integer(i64),
    Text(String),
}

impl Cell {
    fn kind(&self) -> ColumnKind {
        match self {
            Self::Real(_) => ColumnKind::Real,
            Self::Integer(_) => ColumnKind::Integer,
            Self::Text(_) => ColumnKind::Text,
        }
    }

    fn render(&self) -> String {
        match self {
            // shortest representation that parses back to the same bits
            Self::Real(x) if *x != 0.0 && (x.abs() < 1e-4 || x.abs() >= 1e15) => format!("{x:e}"),
            Self::Real(x) => format!("{x}"),
            Self::Integer(i) => i.to_string(),
            Self::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Self::Real(x)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Self::Integer(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Self::Integer(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Self::Integer(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Self::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Self::Text(x)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
    /// Config echo, code version, tolerances and timings. Not part of the
    /// CSV and not compared by [`ResultTable::same_rows`].
    pub metadata: Map<String, Value>,
}

impl ResultTable {
    pub fn new(name: &str, columns: &[(&str, ColumnKind, &str)]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns
                .iter()
                .map(|(n, k, u)| Column {
                    name: n.to_string(),
                    kind: *k,
                    unit: u.to_string(),
                })
                .collect(),
            rows: Vec::new(),
            metadata: Map::new(),
        }
    }

    /// Appends a row after checking arity, types and finiteness.
    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(CliError::Table(format!(
                "{}: row has {} cells for {} columns",
                self.name,
                row.len(),
                self.columns.len()
            )));
        }
        for (c, col) in row.iter().zip(&self.columns) {
            if c.kind() != col.kind {
                return Err(CliError::Table(format!("{}: column {} expects {:?}", self.name, col.name, col.kind)));
            }
            if let Cell::Real(x) = c {
                if !x.is_finite() {
                    return Err(CliError::Table(format!("{}: non-finite value in {}", self.name, col.name)));
                }
            }
            if let Cell::Text(s) = c {
                if s.contains('\n') {
                    return Err(CliError::Table(format!("{}: newline in {}", self.name, col.name)));
                }
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn real(&self, row: usize, name: &str) -> Option<f64> {
        match self.rows.get(row)?.get(self.column(name)?)? {
            Cell::Real(x) => Some(*x),
            _ => None,
        }
    }

    pub fn integer(&self, row: usize, name: &str) -> Option<i64> {
        match self.rows.get(row)?.get(self.column(name)?)? {
            Cell::Integer(x) => Some(*x),
            _ => None,
        }
    }

    pub fn text(&self, row: usize, name: &str) -> Option<&str> {
        match self.rows.get(row)?.get(self.column(name)?)? {
            Cell::Text(x) => Some(x),
            _ => None,
        }
    }

    /// Indices of rows whose cells equal the given values.
    pub fn find(&self, keys: &[(&str, Cell)]) -> Vec<usize> {
        let cols: Vec<Option<usize>> = keys.iter().map(|(k, _)| self.column(k)).collect();
        (0..self.rows.len())
            .filter(|&r| {
                keys.iter()
                    .zip(&cols)
                    .all(|((_, v), c)| c.is_some_and(|c| &self.rows[r][c] == v))
            })
            .collect()
    }

    pub fn set_meta(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.metadata.insert(key.to_string(), v);
    }

    /// Equal names, columns and row contents.
    pub fn same_rows(&self, other: &ResultTable) -> bool {
        self.name == other.name && self.columns == other.columns && self.rows == other.rows
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut head = String::new();
        writeln!(head, "# table: {}", self.name).ok();
        for c in &self.columns {
            writeln!(head, "# column: {} [{}] {}", c.name, c.kind.as_str(), c.unit).ok();
        }
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render))?;
        }
        let body = w.into_inner().map_err(|e| CliError::Table(e.to_string()))?;
        Ok(head + &String::from_utf8_lossy(&body))
    }

    /// Inverse of [`ResultTable::to_csv_string`]; metadata is left empty.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut name = None;
        let mut columns = Vec::new();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            let line = line.trim_start_matches('#').trim();
            if let Some(n) = line.strip_prefix("table: ") {
                name = Some(n.to_string());
            } else if let Some(rest) = line.strip_prefix("column: ") {
                let bad = || CliError::Table(format!("bad column comment '{line}'"));
                let (cname, rest) = rest.split_once(" [").ok_or_else(bad)?;
                let (kind, unit) = rest.split_once(']').ok_or_else(bad)?;
                columns.push(Column {
                    name: cname.to_string(),
                    kind: ColumnKind::parse(kind).ok_or_else(bad)?,
                    unit: unit.trim().to_string(),
                });
            }
        }
        let name = name.ok_or_else(|| CliError::Table("missing '# table:' line".into()))?;
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
        if header.len() != columns.len() || header.iter().zip(&columns).any(|(h, c)| h != &c.name) {
            return Err(CliError::Table(format!("{name}: header does not match column comments")));
        }
        let mut t = ResultTable {
            name,
            columns,
            rows: Vec::new(),
            metadata: Map::new(),
        };
        for rec in r.records() {
            let rec = rec?;
            let mut row = Vec::with_capacity(rec.len());
            for (field, col) in rec.iter().zip(&t.columns) {
                let bad = || CliError::Table(format!("{}: cannot parse '{field}' in {}", t.name, col.name));
                row.push(match col.kind {
                    ColumnKind::Real => Cell::Real(field.parse().map_err(|_| bad())?),
                    ColumnKind::Integer => Cell::Integer(field.parse().map_err(|_| bad())?),
                    ColumnKind::Text => Cell::Text(field.to_string()),
                });
            }
            t.push(row)?;
        }
        Ok(t)
    }

    /// Writes `<dir>/<name>.csv` and `<dir>/<name>.json`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{}.csv", self.name));
        std::fs::write(&csv_path, self.to_csv_string()?)?;
        let meta = serde_json::json!({
            "table": self.name,
            "columns": self.columns,
            "rows": self.rows.len(),
            "metadata": self.metadata,
        });
        let text = serde_json::to_string_pretty(&meta).map_err(|e| CliError::Table(e.to_string()))?;
        std::fs::write(dir.join(format!("{}.json", self.name)), text + "\n")?;
        Ok(csv_path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }
}
