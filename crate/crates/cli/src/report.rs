//! Report model and the three output formats.

use std::io::{self, Write};

use ncprob_core::io::encode_matrix;
use ncprob_core::linalg::CMat;
use serde_json::{json, Map, Value};

use crate::RunConfig;

pub const SCHEMA: &str = "ncprob/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    /// Passes when `value ≤ bound`.
    AtMost,
    /// Passes when `value > bound`.
    Above,
}

#[derive(Clone, Debug)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub relation: Relation,
    pub detail: Option<String>,
}

impl Check {
    pub fn passed(&self) -> bool {
        match self.relation {
            Relation::AtMost => self.value <= self.bound,
            Relation::Above => self.value > self.bound,
        }
    }

    fn json(&self) -> Value {
        let mut m = Map::new();
        m.insert("suite".into(), json!(self.suite));
        m.insert("name".into(), json!(self.name));
        m.insert("value".into(), number(self.value));
        m.insert("bound".into(), number(self.bound));
        m.insert(
            "relation".into(),
            json!(match self.relation {
                Relation::AtMost => "at_most",
                Relation::Above => "above",
            }),
        );
        m.insert("passed".into(), json!(self.passed()));
        if let Some(d) = &self.detail {
            m.insert("detail".into(), json!(d));
        }
        Value::Object(m)
    }

    pub fn describe(&self) -> String {
        let op = match self.relation {
            Relation::AtMost => "<=",
            Relation::Above => ">",
        };
        let mut s = format!(
            "{} {}/{}: {} {op} {}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            sci(self.value),
            sci(self.bound)
        );
        if let Some(d) = &self.detail {
            s.push_str(&format!(" ({d})"));
        }
        s
    }
}

#[derive(Clone, Debug)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Bool(bool),
    Matrix(CMat),
}

impl Cell {
    fn json(&self) -> Value {
        match self {
            Cell::Int(i) => json!(i),
            Cell::Num(x) => number(*x),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
            Cell::Matrix(m) => encode_matrix(m),
        }
    }

    fn plain(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => sci(*x),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Matrix(m) => matrix_text(m),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub command: String,
    pub target: String,
    pub config: RunConfig,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(command: &str, target: &str, config: &RunConfig) -> Self {
        Self {
            command: command.into(),
            target: target.into(),
            config: config.clone(),
            checks: Vec::new(),
            tables: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "schema": SCHEMA,
            "command": self.command,
            "target": self.target,
            "config": serde_json::to_value(&self.config).expect("config serializes"),
            "passed": self.passed(),
            "checks": self.checks.iter().map(Check::json).collect::<Vec<_>>(),
            "tables": self.tables.iter().map(|t| json!({
                "name": t.name,
                "columns": t.columns,
                "rows": t.rows.iter().map(|r| r.iter().map(Cell::json).collect::<Vec<_>>()).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "notes": self.notes,
        })
    }

    pub fn render_json(&self) -> Vec<u8> {
        let mut out = Vec::new();
        write_json(&mut out, &self.to_json()).expect("writing to memory");
        out.push(b'\n');
        out
    }

    /// Checks as one table followed by every other table; tables are
    /// separated by a blank line.
    pub fn render_csv(&self) -> Vec<u8> {
        let mut checks = Table::new("checks", &["suite", "name", "value", "bound", "relation", "passed", "detail"]);
        for c in &self.checks {
            checks.push(vec![
                Cell::Text(c.suite.clone()),
                Cell::Text(c.name.clone()),
                Cell::Num(c.value),
                Cell::Num(c.bound),
                Cell::Text(
                    match c.relation {
                        Relation::AtMost => "at_most",
                        Relation::Above => "above",
                    }
                    .into(),
                ),
                Cell::Bool(c.passed()),
                Cell::Text(c.detail.clone().unwrap_or_default()),
            ]);
        }
        let tables: Vec<&Table> = if self.command == "moments" {
            self.tables.iter().collect()
        } else {
            std::iter::once(&checks).chain(&self.tables).collect()
        };
        let mut out = Vec::new();
        for (i, t) in tables.into_iter().enumerate() {
            if i > 0 {
                out.push(b'\n');
            }
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&t.columns).expect("writing to memory");
            for row in &t.rows {
                w.write_record(row.iter().map(Cell::plain)).expect("writing to memory");
            }
            out.extend(w.into_inner().expect("writing to memory"));
        }
        out
    }

    pub fn render_text(&self) -> Vec<u8> {
        let mut s = format!("ncprob {} {}\n", self.command, self.target);
        for note in &self.notes {
            s.push_str(&format!("note: {note}\n"));
        }
        for t in &self.tables {
            s.push('\n');
            s.push_str(&format!("{}\n", t.name));
            let cells: Vec<Vec<String>> = t.rows.iter().map(|r| r.iter().map(Cell::plain).collect()).collect();
            let widths: Vec<usize> = (0..t.columns.len())
                .map(|j| {
                    cells
                        .iter()
                        .map(|r| r[j].chars().count())
                        .chain(std::iter::once(t.columns[j].chars().count()))
                        .max()
                        .unwrap_or(0)
                })
                .collect();
            let line = |row: &[String]| {
                row.iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c:<w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
                    .trim_end()
                    .to_string()
            };
            s.push_str(&line(&t.columns));
            s.push('\n');
            for r in &cells {
                s.push_str(&line(r));
                s.push('\n');
            }
        }
        if !self.checks.is_empty() {
            s.push('\n');
            for c in &self.checks {
                s.push_str(&c.describe());
                s.push('\n');
            }
        }
        let failed = self.failures().count();
        s.push_str(&format!(
            "\n{} checks, {} failed: {}\n",
            self.checks.len(),
            failed,
            if failed == 0 { "PASS" } else { "FAIL" }
        ));
        s.into_bytes()
    }
}

/// Non-finite values have no JSON number form and are written as null.
fn number(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

fn complex_text(re: f64, im: f64) -> String {
    if im == 0.0 {
        sci(re)
    } else {
        format!("{}{}{}i", sci(re), if im < 0.0 { "-" } else { "+" }, sci(im.abs()))
    }
}

fn matrix_text(m: &CMat) -> String {
    if m.nrows() == 1 && m.ncols() == 1 {
        return complex_text(m[(0, 0)].re, m[(0, 0)].im);
    }
    let rows: Vec<String> = (0..m.nrows())
        .map(|i| {
            let cells: Vec<String> = (0..m.ncols()).map(|j| complex_text(m[(i, j)].re, m[(i, j)].im)).collect();
            format!("[{}]", cells.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

/// Compact JSON with every float printed to 17 significant digits.
struct Scientific;

impl serde_json::ser::Formatter for Scientific {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{:.16e}", value as f64)
    }
}

pub fn write_json<W: Write>(w: W, v: &Value) -> serde_json::Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(w, Scientific);
    serde::Serialize::serialize(v, &mut ser)
}
