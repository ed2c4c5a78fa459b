//! CSV tables and JSON summaries.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const SIMULATE_SCHEMA: &str = "simulate/1";
pub const SIMULATE_SUMMARY_SCHEMA: &str = "simulate-summary/1";
pub const BASIC_SCHEMA: &str = "basic/1";
pub const STATIONARY_SCHEMA: &str = "stationary/1";
pub const PROFILE_SCHEMA: &str = "profile/1";
pub const CGF_SCHEMA: &str = "cgf/1";

/// Seventeen significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildInfo {
    pub version: &'static str,
    pub git: &'static str,
}

pub fn build_info() -> BuildInfo {
    BuildInfo {
        version: env!("CARGO_PKG_VERSION"),
        git: env!("SCATTER_GIT_DESCRIBE"),
    }
}

/// A table with a fixed header whose first column is the schema version.
pub struct Table {
    schema: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(schema: &'static str, header: &[&'static str]) -> Self {
        Self {
            schema,
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut head = vec!["schema_version"];
        head.extend(&self.header);
        w.write_record(&head)?;
        for r in &self.rows {
            w.write_record(std::iter::once(self.schema).chain(r.iter().map(String::as_str)))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Creates the output directory and names files inside it.
pub struct OutputDir {
    dir: PathBuf,
    prefix: String,
}

impl OutputDir {
    pub fn create(dir: &Path, prefix: &str) -> CliResult<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            prefix: prefix.to_string(),
        })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{}{name}", self.prefix))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn table_quotes_and_versions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new("demo/1", &["name", "value"]);
        t.push(vec!["a,b".into(), num(1.0)]);
        t.write(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "schema_version,name,value\ndemo/1,\"a,b\",1.0000000000000000e0\n");
    }
}
