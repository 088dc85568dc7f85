//! Run reports: machine-readable JSON and aligned text.

use std::fmt::Write as _;

use badapprox::exact::AlgebraicScalar;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// An asserted inequality, both sides as exact strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inequality {
    pub name: String,
    pub lhs: String,
    pub relation: String,
    pub rhs: String,
    pub holds: bool,
}

impl Inequality {
    pub fn new(name: impl Into<String>, lhs: impl ToString, relation: &str, rhs: impl ToString, holds: bool) -> Self {
        Self { name: name.into(), lhs: lhs.to_string(), relation: relation.into(), rhs: rhs.to_string(), holds }
    }

    /// `lhs >= rhs` decided exactly.
    pub fn ge(name: impl Into<String>, lhs: &AlgebraicScalar, rhs: &AlgebraicScalar) -> Self {
        Self::new(name, lhs, ">=", rhs, lhs >= rhs)
    }

    pub fn le(name: impl Into<String>, lhs: &AlgebraicScalar, rhs: &AlgebraicScalar) -> Self {
        Self::new(name, lhs, "<=", rhs, lhs <= rhs)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(title: &str, columns: &[&str]) -> Self {
        Self { title: title.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut width: Vec<usize> = self.columns.iter().map(String::len).collect();
        for r in &self.rows {
            for (i, c) in r.iter().enumerate() {
                if i < width.len() {
                    width[i] = width[i].max(c.chars().count());
                }
            }
        }
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:>w$}")).collect();
            parts.join("  ").trim_end().to_string()
        };
        let mut out = String::new();
        if !self.title.is_empty() {
            let _ = writeln!(out, "{}", self.title);
        }
        let _ = writeln!(out, "{}", line(&self.columns));
        for r in &self.rows {
            let _ = writeln!(out, "{}", line(r));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: u32,
    pub version: String,
    pub command: String,
    pub inputs: serde_json::Value,
    pub elapsed_ms: u64,
    pub summary: Vec<(String, String)>,
    pub tables: Vec<Table>,
    pub inequalities: Vec<Inequality>,
    pub payload: serde_json::Value,
    pub artifacts: Vec<String>,
}

impl RunReport {
    pub fn new(command: &str, inputs: serde_json::Value) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            inputs,
            elapsed_ms: 0,
            summary: Vec::new(),
            tables: Vec::new(),
            inequalities: Vec::new(),
            payload: serde_json::Value::Null,
            artifacts: Vec::new(),
        }
    }

    pub fn field(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn all_hold(&self) -> bool {
        self.inequalities.iter().all(|i| i.holds)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} ({} ms)", self.command, self.elapsed_ms);
        let kw = self.summary.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in &self.summary {
            let _ = writeln!(out, "  {k:<kw$}  {v}");
        }
        for t in &self.tables {
            out.push('\n');
            out.push_str(&t.render());
        }
        if !self.inequalities.is_empty() {
            out.push('\n');
            for i in &self.inequalities {
                let mark = if i.holds { "ok" } else { "FAILS" };
                let _ = writeln!(out, "  [{mark}] {}: {} {} {}", i.name, i.lhs, i.relation, i.rhs);
            }
        }
        for a in &self.artifacts {
            let _ = writeln!(out, "  wrote {a}");
        }
        out
    }
}
