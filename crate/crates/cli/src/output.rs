//! Versioned CSV files: a `# schema=<name> seed=<root seed>` line, a header, rows.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{CliError, Result};

pub const ATTACK_SCHEMA: &str = "mvmf-attack/1";
pub const SOLVERS_SCHEMA: &str = "mvmf-solvers/1";
pub const EVAL_SCHEMA: &str = "mvmf-eval/1";
pub const PRIVACY_SCHEMA: &str = "mvmf-privacy/1";
pub const MODEL_SCHEMA: &str = "mvmf-model/1";

/// Creates `path` (and its parents) and writes the schema line.
pub fn create_versioned(path: &Path, schema: &str, seed: u64) -> Result<BufWriter<File>> {
    let mut out = create(path)?;
    writeln!(out, "# schema={schema} seed={seed}")?;
    Ok(out)
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::Other(format!("{}: {e}", parent.display())))?;
    }
    let file = File::create(path).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

/// A CSV written by this tool: schema line fields plus rows keyed by header name.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub meta: HashMap<String, String>,
    pub rows: Vec<HashMap<String, String>>,
}

impl Table {
    pub fn schema(&self) -> Option<&str> {
        self.meta.get("schema").map(String::as_str)
    }
}

/// Reads a file produced by [`create_versioned`] or the trace writers.
pub fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let mut meta = HashMap::new();
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (no, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        if header.is_none() && line.starts_with('#') {
            for field in line.trim_start_matches('#').split_whitespace() {
                if let Some((k, v)) = field.split_once('=') {
                    meta.insert(k.to_string(), v.to_string());
                }
            }
            continue;
        }
        let cells: Vec<String> = line.split(',').map(str::to_string).collect();
        match &header {
            None => header = Some(cells),
            Some(h) if h.len() != cells.len() => {
                return Err(CliError::input(format!(
                    "{}:{}: {} fields, header has {}",
                    path.display(),
                    no + 1,
                    cells.len(),
                    h.len()
                )));
            }
            Some(h) => rows.push(h.iter().cloned().zip(cells).collect()),
        }
    }
    if header.is_none() {
        return Err(CliError::input(format!("{}: no header row", path.display())));
    }
    Ok(Table { meta, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn versioned_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/x.csv");
        {
            let mut out = create_versioned(&path, "demo/1", 9).unwrap();
            writeln!(out, "a,b").unwrap();
            writeln!(out, "1,two").unwrap();
        }
        let t = read_table(&path).unwrap();
        assert_eq!(t.schema(), Some("demo/1"));
        assert_eq!(t.meta["seed"], "9");
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0]["b"], "two");
    }
}
