//! Report serialization: CSV with `#` header lines echoing the version and run
//! configuration, JSON documents wrapping {version, config, result}, and atomic
//! file replacement.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

pub const VERSION: &str = concat!("fbmlab ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// CSV table: `# version`, `# config: {json}`, optional `# key: value` notes, then
/// a header row and records.
pub struct CsvReport {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    notes: Vec<(String, String)>,
}

impl CsvReport {
    pub fn new(header: &[&str]) -> Self {
        CsvReport { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new(), notes: Vec::new() }
    }

    pub fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        self.notes.push((key.to_string(), value.to_string()));
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render<C: Serialize>(&self, config: &C) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        writeln!(out, "# {VERSION}")?;
        writeln!(out, "# config: {}", serde_json::to_string(config)?)?;
        for (k, v) in &self.notes {
            writeln!(out, "# {k}: {v}")?;
        }
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        drop(w);
        Ok(out)
    }
}

/// Shortest round-trip decimal for finite values; `inf`, `-inf`, `nan` otherwise.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:?}")
    }
}

#[derive(Serialize)]
struct JsonReport<'a, C, R> {
    version: &'a str,
    config: &'a C,
    result: &'a R,
}

pub fn render_json<C: Serialize, R: Serialize>(config: &C, result: &R) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(&JsonReport { version: VERSION, config, result })?;
    out.push(b'\n');
    Ok(out)
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}
