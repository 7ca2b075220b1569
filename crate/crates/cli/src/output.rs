//! Artifact files: CSV tables, two-column plot data and the TOML summary.
//!
//! Every file starts by naming the SHA-256 of the config that produced it.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use toml::{Table, Value};

pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// 17 significant digits, enough to round-trip any double.
pub fn float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => float(*v),
            Cell::Text(s) => s.clone(),
        }
    }
}

pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Everything one command produces.
#[derive(Default)]
pub struct Artifacts {
    pub results: Table,
    pub tables: Vec<(String, CsvTable)>,
    pub plots: Vec<(String, Vec<(f64, f64)>)>,
    /// Other files written verbatim, such as measure JSON.
    pub files: Vec<(String, String)>,
}

pub struct Provenance<'a> {
    pub command: &'a str,
    pub seed: u64,
    pub config_hash: &'a str,
}

fn hash_line(hash: &str) -> String {
    format!("# config_sha256 = {hash}\n")
}

fn render_csv(t: &CsvTable, hash: &str) -> String {
    let mut out = hash_line(hash);
    out.push_str(&t.header.join(","));
    out.push('\n');
    for row in &t.rows {
        let cells: Vec<String> = row.iter().map(Cell::render).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn render_plot(points: &[(f64, f64)], hash: &str) -> String {
    let mut out = hash_line(hash);
    for (x, y) in points {
        let _ = writeln!(out, "{} {}", float(*x), float(*y));
    }
    out
}

pub fn summary_document(a: &Artifacts, p: &Provenance) -> String {
    let mut prov = Table::new();
    prov.insert("command".into(), p.command.into());
    prov.insert("seed".into(), Value::Integer(p.seed as i64));
    prov.insert("config_sha256".into(), p.config_hash.into());
    prov.insert("library_version".into(), potlab::VERSION.into());
    prov.insert("cli_version".into(), env!("CARGO_PKG_VERSION").into());
    let names = |v: Vec<&String>| Value::Array(v.into_iter().map(|s| Value::from(s.as_str())).collect());
    let mut outputs = Table::new();
    outputs.insert("tables".into(), names(a.tables.iter().map(|t| &t.0).collect()));
    outputs.insert("plots".into(), names(a.plots.iter().map(|t| &t.0).collect()));
    outputs.insert("files".into(), names(a.files.iter().map(|t| &t.0).collect()));
    let mut doc = Table::new();
    doc.insert("provenance".into(), Value::Table(prov));
    doc.insert("outputs".into(), Value::Table(outputs));
    doc.insert("results".into(), Value::Table(a.results.clone()));
    toml::to_string(&doc).expect("summary tables always serialise")
}

pub fn write_all(dir: &Path, a: &Artifacts, p: &Provenance) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, t) in &a.tables {
        fs::write(dir.join(name), render_csv(t, p.config_hash))?;
    }
    for (name, pts) in &a.plots {
        fs::write(dir.join(name), render_plot(pts, p.config_hash))?;
    }
    for (name, body) in &a.files {
        fs::write(dir.join(name), body)?;
    }
    fs::write(dir.join("summary.toml"), summary_document(a, p))
}

/// Machine-readable error report.
pub fn error_document(code: i32, kind: &str, message: &str, config_hash: Option<&str>) -> String {
    let mut err = Table::new();
    err.insert("exit_code".into(), Value::Integer(code.into()));
    err.insert("kind".into(), kind.into());
    err.insert("message".into(), message.into());
    if let Some(h) = config_hash {
        err.insert("config_sha256".into(), h.into());
    }
    let mut doc = Table::new();
    doc.insert("error".into(), Value::Table(err));
    toml::to_string(&doc).expect("error tables always serialise")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_csv_text() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(float(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn csv_has_hash_then_header() {
        let mut t = CsvTable::new(["a", "b"]);
        t.push(vec![1usize.into(), 0.5.into()]);
        let text = render_csv(&t, "abc");
        assert_eq!(text, "# config_sha256 = abc\na,b\n1,5.0000000000000000e-1\n");
    }
}
