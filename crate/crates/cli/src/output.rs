//! Tables and documents as deterministic CSV/JSON, plus the run sidecar.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::config::{Format, RunConfig};
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Twelve significant digits, the precision of every written number.
pub fn fmt_num(v: f64) -> String {
    // −0 prints as 0 so sign-of-zero noise never reaches a diff
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.11e}")
}

/// `v` rounded to what [`fmt_num`] prints; non-finite values become null.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        Value::from(fmt_num(v).parse::<f64>().expect("formatted float parses"))
    } else {
        Value::Null
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        self.rows
            .iter()
            .map(|r| match r[i] {
                Cell::Num(v) => Some(v),
                Cell::Text(_) => None,
            })
            .collect()
    }

    fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                Value::Array(
                    r.iter()
                        .map(|c| match c {
                            Cell::Num(v) => num(*v),
                            Cell::Text(s) => Value::String(s.clone()),
                        })
                        .collect(),
                )
            })
            .collect();
        json!({ "columns": self.columns, "rows": rows })
    }
}

/// Result of one command.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: &'static str,
    /// Tabular data; every command has one so CSV output always works.
    pub table: Table,
    /// Structured form for JSON output, when richer than the table.
    pub document: Option<Map<String, Value>>,
    /// Diagnostics for the sidecar.
    pub diagnostics: Map<String, Value>,
    /// Set when a numerical check failed; the process exits with code 2.
    pub failed: bool,
}

impl Report {
    pub fn new(command: &'static str, table: Table) -> Self {
        Self {
            command,
            table,
            document: None,
            diagnostics: Map::new(),
            failed: false,
        }
    }

    pub fn schema(&self) -> String {
        format!("qfim3d/{}/v{SCHEMA_VERSION}", self.command)
    }

    pub fn diagnose(&mut self, key: &str, value: Value) {
        self.diagnostics.insert(key.to_string(), value);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut out = format!("# schema: {}\n", self.schema());
                out.push_str(&self.table.columns.join(","));
                out.push('\n');
                for row in &self.table.rows {
                    let cells: Vec<String> = row
                        .iter()
                        .map(|c| match c {
                            Cell::Num(v) => fmt_num(*v),
                            Cell::Text(s) => s.clone(),
                        })
                        .collect();
                    let _ = writeln!(out, "{}", cells.join(","));
                }
                out
            }
            Format::Json => {
                let mut doc = Map::new();
                doc.insert("schema".into(), Value::String(self.schema()));
                match &self.document {
                    Some(d) => doc.extend(d.clone()),
                    None => doc.extend(
                        self.table
                            .to_json()
                            .as_object()
                            .cloned()
                            .unwrap_or_default(),
                    ),
                }
                let mut s =
                    serde_json::to_string_pretty(&Value::Object(doc)).expect("serializable");
                s.push('\n');
                s
            }
        }
    }
}

pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Format from the config, else from the output extension, else `fallback`.
pub fn pick_format(cfg: &RunConfig, fallback: Format) -> Format {
    cfg.format.unwrap_or_else(|| {
        match cfg
            .output
            .as_deref()
            .and_then(|p| p.extension())
            .and_then(|e| e.to_str())
        {
            Some("csv") => Format::Csv,
            Some("json") => Format::Json,
            _ => fallback,
        }
    })
}

/// Writes the data file and its metadata sidecar. Data files carry nothing
/// run-specific; timing and environment go to the sidecar only.
pub fn write_report(
    report: &Report,
    cfg: &RunConfig,
    format: Format,
    elapsed_s: f64,
    threads: usize,
) -> Result<Option<PathBuf>, CliError> {
    let body = report.render(format);
    let Some(path) = &cfg.output else {
        print!("{body}");
        return Ok(None);
    };
    std::fs::write(path, body)?;
    let meta = json!({
        "schema": report.schema(),
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": report.command,
        "config": cfg,
        "threads": threads,
        "elapsed_s": elapsed_s,
        "numerical_failure": report.failed,
        "diagnostics": report.diagnostics,
    });
    let side = sidecar_path(path);
    std::fs::write(&side, serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(Some(side))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(fmt_num(-2.5e8), "-2.50000000000e8");
        assert_eq!(num(1.0 / 3.0), json!(0.333333333333));
        assert_eq!(num(f64::NAN), Value::Null);
        assert_eq!(fmt_num(-0.0), "0.00000000000e0");
    }

    #[test]
    fn csv_has_schema_and_header() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![1.0.into(), "x".into()]);
        let r = Report::new("demo", t);
        let csv = r.render(Format::Csv);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines,
            ["# schema: qfim3d/demo/v1", "a,b", "1.00000000000e0,x"]
        );
        let json: Value = serde_json::from_str(&r.render(Format::Json)).unwrap();
        assert_eq!(json["columns"], json!(["a", "b"]));
        assert_eq!(json["rows"][0], json!([1.0, "x"]));
        assert_eq!(r.table.column("a"), Some(vec![1.0]));
        assert_eq!(r.table.column("b"), None);
    }

    #[test]
    fn sidecar_sits_next_to_output() {
        assert_eq!(
            sidecar_path(Path::new("out/map.csv")),
            PathBuf::from("out/map.csv.meta.json")
        );
    }
}
