//! CSV tables and run manifests.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Reals with 17 significant digits, `inf`/`-inf` for infinities and `nan`.
pub fn real(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:.16e}")
    }
}

/// Absent values are written as empty fields.
pub fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

/// A named CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&'static str]) -> Self {
        Self {
            name: name.into(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub wall_time_seconds: f64,
    pub files: Vec<String>,
    /// Per-part seeds and stream ids, for commands that run several parts.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<PartSeed>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PartSeed {
    pub name: String,
    pub seed: u64,
    pub stream: u64,
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::config("out", format!("cannot write {}: {e}", path.display()))
}

/// Writes every table to `dir` and then the manifest, returning the paths written.
pub fn write_run(dir: &Path, tables: &[Table], manifest: &mut RunManifest) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut written = Vec::new();
    for t in tables {
        let path = dir.join(t.file_name());
        std::fs::write(&path, t.to_csv()).map_err(|e| io_error(&path, e))?;
        manifest.files.push(t.file_name());
        written.push(path);
    }
    let path = dir.join(format!("{}_manifest.json", manifest.command));
    let mut json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    json.push('\n');
    std::fs::write(&path, json).map_err(|e| io_error(&path, e))?;
    written.push(path);
    Ok(written)
}
