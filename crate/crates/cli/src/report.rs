//! Deterministic CSV and JSON summary output. Floats are always printed
//! with 17 significant digits so identical configs produce byte-identical
//! files on any platform.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

/// `17` significant digits round-trips every finite f64.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new<S: Into<String>>(header: Vec<S>) -> Self {
        Csv {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "ragged CSV row");
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Writes to `path`, or to stdout when no path is given.
pub fn write_output(path: Option<&Path>, content: &str) -> io::Result<()> {
    match path {
        Some(p) => fs::write(p, content),
        None => io::stdout().write_all(content.as_bytes()),
    }
}

pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub struct OrderFit {
    pub name: String,
    /// `None` when the residuals sit at machine noise and no decay order
    /// can be fitted; such a series is reported as exact.
    pub fitted: Option<f64>,
    pub expected: f64,
    pub pass: bool,
}

pub struct Summary {
    pub checks: Vec<Check>,
    pub orders: Vec<OrderFit>,
}

impl Summary {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass) && self.orders.iter().all(|o| o.pass)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let checks: Vec<serde_json::Value> = self
            .checks
            .iter()
            .map(|c| {
                serde_json::json!({
                    "name": c.name,
                    "residual": c.residual,
                    "tolerance": c.tolerance,
                    "pass": c.pass,
                })
            })
            .collect();
        let orders: Vec<serde_json::Value> = self
            .orders
            .iter()
            .map(|o| {
                let mut v = serde_json::json!({
                    "name": o.name,
                    "fitted": o.fitted,
                    "expected": o.expected,
                    "pass": o.pass,
                });
                if o.fitted.is_none() {
                    v["exact"] = serde_json::Value::Bool(true);
                }
                v
            })
            .collect();
        serde_json::json!({ "checks": checks, "orders": orders })
    }

    pub fn render(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("summary is valid JSON");
        s.push('\n');
        s
    }
}
