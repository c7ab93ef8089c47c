//! Machine-readable (JSON) and human-readable (text) result emission.
//! Reports contain no timestamps or absolute paths, so a fixed seed yields
//! byte-identical files across runs.

use anyhow::{Context, Result};
use gdbal_core::nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub seed: u64,
    pub outcome: String,
    pub sections: Vec<Section>,
}

#[derive(Debug, Serialize)]
pub struct Section {
    pub name: String,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Number(f64),
    Int(i64),
    Text(String),
    Vector(Vec<f64>),
}

#[derive(Debug, Serialize)]
pub struct Entry {
    pub key: String,
    pub value: Value,
}

impl Report {
    pub fn new(command: &str, seed: u64) -> Self {
        Report { command: command.into(), seed, outcome: "ok".into(), sections: Vec::new() }
    }

    pub fn section(&mut self, name: &str) -> &mut Section {
        self.sections.push(Section { name: name.into(), entries: Vec::new() });
        self.sections.last_mut().unwrap()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "command: {}", self.command);
        let _ = writeln!(out, "seed: {}", self.seed);
        let _ = writeln!(out, "outcome: {}", self.outcome);
        for s in &self.sections {
            let _ = writeln!(out, "\n[{}]", s.name);
            for e in &s.entries {
                match &e.value {
                    Value::Bool(b) => {
                        let _ = writeln!(out, "  {} = {}", e.key, b);
                    }
                    Value::Number(v) => {
                        let _ = writeln!(out, "  {} = {}", e.key, v);
                    }
                    Value::Int(v) => {
                        let _ = writeln!(out, "  {} = {}", e.key, v);
                    }
                    Value::Text(t) => {
                        let _ = writeln!(out, "  {} = {}", e.key, t);
                    }
                    Value::Vector(vs) => {
                        let joined: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
                        let _ = writeln!(out, "  {} = [{}]", e.key, joined.join(", "));
                    }
                }
            }
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join("report.json"), json + "\n")
            .context("writing report.json")?;
        std::fs::write(dir.join("report.txt"), self.to_text()).context("writing report.txt")?;
        Ok(())
    }
}

impl Section {
    pub fn flag(&mut self, key: &str, v: bool) -> &mut Self {
        self.entries.push(Entry { key: key.into(), value: Value::Bool(v) });
        self
    }

    pub fn num(&mut self, key: &str, v: f64) -> &mut Self {
        self.entries.push(Entry { key: key.into(), value: Value::Number(v) });
        self
    }

    pub fn int(&mut self, key: &str, v: i64) -> &mut Self {
        self.entries.push(Entry { key: key.into(), value: Value::Int(v) });
        self
    }

    pub fn text(&mut self, key: &str, v: impl Into<String>) -> &mut Self {
        self.entries.push(Entry { key: key.into(), value: Value::Text(v.into()) });
        self
    }

    pub fn vector(&mut self, key: &str, v: &DVector<f64>) -> &mut Self {
        self.entries.push(Entry {
            key: key.into(),
            value: Value::Vector(v.iter().copied().collect()),
        });
        self
    }
}

/// Write a matrix as CSV with full-precision decimal entries.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Write a labeled column table as CSV (header + rows).
pub fn write_table_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let row: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
