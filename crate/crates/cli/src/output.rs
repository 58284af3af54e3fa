//! CSV and JSON emission. CSV uses LF line endings and serializes floats with
//! 17 significant digits so values round-trip exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// 17-significant-digit float formatting (round-trip exact for f64).
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub struct CsvWriter {
    inner: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> std::io::Result<Self> {
        let mut inner = BufWriter::new(File::create(path)?);
        writeln!(inner, "{}", header.join(","))?;
        Ok(Self { inner })
    }

    pub fn row(&mut self, fields: &[String]) -> std::io::Result<()> {
        writeln!(self.inner, "{}", fields.join(","))
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> std::io::Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()
}

/// Sibling path with a different suffix, e.g. `runs.csv` -> `runs.summary.json`.
pub fn with_suffix(path: &Path, suffix: &str) -> std::path::PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    path.with_file_name(format!("{stem}{suffix}"))
}
