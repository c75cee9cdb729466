//! Tabular results and the output directory.
//!
//! CSV numbers are formatted deterministically: integers bare, reals with six
//! significant digits. JSON keeps full precision.

use std::path::{Path, PathBuf};

use realm_core::report::fmt_real;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{ExperimentConfig, Format};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i128),
    Real(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => fmt_real(*v),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => i64::try_from(*v).map(Value::from).unwrap_or_else(|_| Value::from(v.to_string())),
            Cell::Real(v) if v.is_finite() => json!(v),
            Cell::Real(v) => Value::from(fmt_real(*v)),
            Cell::Text(s) => Value::from(s.as_str()),
            Cell::Bool(b) => Value::from(*b),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v.into())
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i128)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v.into())
    }
}

impl From<i32> for Cell {
    fn from(v: i32) -> Self {
        Cell::Int(v.into())
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: &'static str,
    headers: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &'static str, headers: &[&'static str]) -> Self {
        Self {
            name,
            headers: headers.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.headers.len(), "row width for table {}", self.name);
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn to_csv(&self) -> CliResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Failed(format!("csv encoding failed: {e}"));
        w.write_record(&self.headers).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv)).map_err(io)?;
        }
        w.into_inner()
            .map_err(|e| CliError::Failed(format!("csv encoding failed: {e}")))
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self
                        .headers
                        .iter()
                        .zip(row)
                        .map(|(h, c)| (h.to_string(), c.json()))
                        .collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }

    /// Fixed-width text rendering for the terminal.
    pub fn render(&self) -> String {
        let cells: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(Cell::csv).collect()).collect();
        let widths: Vec<usize> = self
            .headers
            .iter()
            .enumerate()
            .map(|(i, h)| cells.iter().map(|r| r[i].len()).chain([h.len()]).max().unwrap_or(0))
            .collect();
        let line = |vals: Vec<&str>| {
            vals.iter()
                .zip(&widths)
                .map(|(v, w)| format!("{v:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = line(self.headers.clone()) + "\n";
        for r in &cells {
            out += &line(r.iter().map(String::as_str).collect());
            out.push('\n');
        }
        out
    }
}

/// Destination for one command's outputs.
#[derive(Debug, Clone)]
pub struct OutputDir {
    dir: PathBuf,
    formats: Vec<Format>,
}

#[derive(Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    tool_version: &'static str,
    command: &'a str,
    config: &'a ExperimentConfig,
}

impl OutputDir {
    pub fn create(dir: &Path, formats: &[Format]) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut formats = formats.to_vec();
        formats.dedup();
        Ok(Self {
            dir: dir.to_path_buf(),
            formats,
        })
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    pub fn write_bytes(&self, file: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.path(file);
        std::fs::write(&path, bytes).map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }

    pub fn write_table(&self, table: &Table) -> CliResult<Vec<PathBuf>> {
        self.formats
            .iter()
            .map(|f| match f {
                Format::Csv => self.write_bytes(&format!("{}.csv", table.name), &table.to_csv()?),
                Format::Json => {
                    let text = serde_json::to_string_pretty(&table.to_json()).expect("json value") + "\n";
                    self.write_bytes(&format!("{}.json", table.name), text.as_bytes())
                }
            })
            .collect()
    }

    /// Resolved configuration and tool version, for provenance.
    pub fn write_resolved_config(&self, command: &str, cfg: &ExperimentConfig) -> CliResult<PathBuf> {
        let doc = Provenance {
            tool: env!("CARGO_PKG_NAME"),
            tool_version: env!("CARGO_PKG_VERSION"),
            command,
            config: cfg,
        };
        let text = serde_json::to_string_pretty(&doc).expect("config serializes") + "\n";
        self.write_bytes("resolved_config.json", text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> Table {
        let mut t = Table::new("demo", &["name", "count", "value", "flag", "opt"]);
        t.push(vec!["a,b".into(), 3u64.into(), 0.1234567.into(), true.into(), Cell::Empty]);
        t.push(vec!["c".into(), (-2i64).into(), f64::INFINITY.into(), false.into(), 1e-7.into()]);
        t
    }

    #[test]
    fn csv_is_quoted_and_formatted() {
        let text = String::from_utf8(table().to_csv().unwrap()).unwrap();
        assert_eq!(
            text,
            "name,count,value,flag,opt\n\"a,b\",3,0.123457,true,\nc,-2,inf,false,1e-07\n"
        );
    }

    #[test]
    fn json_keeps_precision() {
        let v = table().to_json();
        assert_eq!(v[0]["value"], json!(0.1234567));
        assert_eq!(v[0]["opt"], Value::Null);
        assert_eq!(v[1]["value"], json!("inf"));
        assert_eq!(v[1]["count"], json!(-2));
    }

    #[test]
    fn render_aligns_columns() {
        let r = table().render();
        let lines: Vec<&str> = r.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("name  count"));
    }
}
