//! Report bundle, config hashing and output routing.

use std::fs;
use std::io::Write;
use std::path::Path;

use kipa_core::{Error, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    /// SHA-256 of the canonical (key-sorted, compact) JSON of `inputs`.
    pub config_hash: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportBundle {
    pub command: String,
    pub inputs: Value,
    pub results: Value,
    pub warnings: Vec<String>,
    pub provenance: Provenance,
}

/// Per-point table written as CSV.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Table { headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|v| v.to_string()).collect());
    }

    pub fn push_text(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    /// Two-column `quantity,value` table of the scalar leaves of `v`.
    pub fn from_scalars(v: &Value) -> Self {
        let mut t = Table::new(&["quantity", "value"]);
        flatten("", v, &mut t.rows);
        t
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(&self.headers)?;
        for r in &self.rows {
            wtr.write_record(r)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<Vec<String>>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, v)| flatten(&key(k), v, out)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, v)| flatten(&key(&i.to_string()), v, out)),
        Value::Null => {}
        Value::String(s) => out.push(vec![prefix.to_string(), s.clone()]),
        other => out.push(vec![prefix.to_string(), other.to_string()]),
    }
}

/// Hash of the inputs; serde_json maps are ordered by key, so the hash does
/// not depend on the order of keys in the config file.
pub fn config_hash(inputs: &Value) -> String {
    let canonical = serde_json::to_string(inputs).expect("JSON values always serialize");
    format!("{:x}", Sha256::digest(canonical.as_bytes()))
}

pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

impl ReportBundle {
    pub fn new(command: &str, inputs: Value, results: Value, warnings: Vec<String>) -> Self {
        let config_hash = config_hash(&inputs);
        ReportBundle {
            command: command.into(),
            inputs,
            results,
            warnings,
            provenance: Provenance { tool: env!("CARGO_PKG_NAME"), version: env!("CARGO_PKG_VERSION"), config_hash },
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Writes the bundle. Without `out` everything goes to stdout; with it,
/// `<command>.json` and/or `<command>.csv` are written into that directory.
pub fn emit(bundle: &ReportBundle, table: Option<&Table>, format: Format, out: Option<&Path>) -> Result<()> {
    let scalars;
    let table = match table {
        Some(t) => t,
        None => {
            scalars = Table::from_scalars(&bundle.results);
            &scalars
        }
    };
    match out {
        None => {
            let stdout = std::io::stdout();
            match format {
                Format::Json => stdout.lock().write_all(bundle.to_json().as_bytes())?,
                Format::Csv => table.write(stdout.lock())?,
            }
        }
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let stem = dir.join(&bundle.command);
            if format == Format::Json {
                fs::write(stem.with_extension("json"), bundle.to_json())?;
            }
            table.write(fs::File::create(stem.with_extension("csv"))?)?;
        }
    }
    Ok(())
}
