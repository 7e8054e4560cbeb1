//! Report and CSV writers.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use thermoshadow::{Error, Result};

/// Report written by every subcommand other than `partition`.
#[derive(Debug, Serialize)]
pub struct CommandReport<C: Serialize> {
    pub command: &'static str,
    pub config: C,
    pub summary: Value,
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Numerical(format!("csv: {other:?}")),
    }
}

/// Output directory, created on first use.
pub struct OutDir(PathBuf);

impl OutDir {
    pub fn create(path: &Path) -> Result<Self> {
        std::fs::create_dir_all(path)?;
        Ok(Self(path.to_path_buf()))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf> {
        let p = self.path(name);
        std::fs::write(&p, text)?;
        Ok(p)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(e.to_string()))?;
        self.write_text(name, &text)
    }

    /// One CSV row per serialized record, header from the field names.
    pub fn write_csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<PathBuf> {
        let p = self.path(name);
        let mut w = csv::Writer::from_path(&p).map_err(csv_err)?;
        for r in rows {
            w.serialize(r).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(p)
    }

    /// CSV with an explicit header, written even when there are no rows.
    pub fn write_records(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let p = self.path(name);
        let mut w = csv::Writer::from_path(&p).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(p)
    }
}
